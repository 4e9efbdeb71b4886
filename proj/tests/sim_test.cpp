#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "bbe/sim.hpp"

namespace bbe::sim {
namespace {

PopulationSpec small_spec() {
  PopulationSpec s;
  s.seed = 5;
  s.num_users = 500;
  s.num_features = 2;
  s.num_banners = 3;
  s.feature_prevalence = {0.5, 0.3};
  s.base_ctr = {0.02, 0.03, 0.04};
  s.lift_matrix = {{3.0, 1.0, 1.0}, {1.0, 0.5, 2.0}};
  return s;
}

double odds_compose(double base, double factor) {
  const double odds = base / (1.0 - base) * factor;
  return odds / (1.0 + odds);
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto k = a.index(7);
    EXPECT_EQ(k, b.index(7));
    EXPECT_LT(k, 7u);
  }
  // frozen first draw of the mt19937_64 stream for seed 42
  EXPECT_EQ(Rng(42).uniform(), static_cast<double>(std::mt19937_64(42)() >> 11) * 0x1.0p-53);
}

TEST(PopulationSpec, Validation) {
  PopulationSpec s = small_spec();
  EXPECT_NO_THROW(s.validate());
  s.base_ctr[0] = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s = small_spec();
  s.feature_prevalence[1] = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = small_spec();
  s.lift_matrix[0].pop_back();
  EXPECT_THROW(s.validate(), Error);
}

TEST(PopulationSpec, FromJson) {
  const auto j = nlohmann::json::parse(R"({"seed": 9, "num_users": 10, "feature_prevalence": [0.5],
      "base_ctr": [0.01, 0.02], "lift_matrix": [[2, 1]], "cpc": [1, 2]})");
  const PopulationSpec s = population_spec_from_json(j);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.num_features, 1u);
  EXPECT_EQ(s.num_banners, 2u);
  EXPECT_EQ(s.cpc_of(1), 2.0);
  EXPECT_THROW(population_spec_from_json(nlohmann::json::parse(R"({"base_ctr": [0.5]})")), Error);
}

TEST(GeneratePopulation, DeterministicInSeed) {
  const Population a = generate_population(small_spec());
  const Population b = generate_population(small_spec());
  ASSERT_EQ(a.users().size(), b.users().size());
  for (std::size_t u = 0; u < a.users().size(); ++u) {
    EXPECT_EQ(a.users()[u].features, b.users()[u].features);
    EXPECT_EQ(a.users()[u].click_prob, b.users()[u].click_prob);
  }
}

TEST(GeneratePopulation, NeutralLiftsGiveBaseCtr) {
  PopulationSpec s = small_spec();
  s.lift_matrix = {{1, 1, 1}, {1, 1, 1}};
  const Population pop = generate_population(s);
  for (const auto& u : pop.users())
    for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(u.click_prob[b], s.base_ctr[b], 1e-15);
}

TEST(GeneratePopulation, SingleTriplingFeature) {
  PopulationSpec s;
  s.seed = 77;
  s.num_users = 4000;
  s.num_features = 1;
  s.num_banners = 2;
  s.feature_prevalence = {0.5};
  s.base_ctr = {0.02, 0.03};
  s.lift_matrix = {{3.0, 1.0}};
  const Population pop = generate_population(s);
  std::size_t holders = 0;
  for (const auto& u : pop.users()) {
    if (u.features & 1u) {
      ++holders;
      EXPECT_NEAR(u.click_prob[0], odds_compose(0.02, 3.0), 1e-15);
    } else {
      EXPECT_NEAR(u.click_prob[0], 0.02, 1e-15);
    }
    EXPECT_NEAR(u.click_prob[1], 0.03, 1e-15);
  }
  const double sigma = std::sqrt(0.25 / 4000.0);
  EXPECT_NEAR(static_cast<double>(holders) / 4000.0, 0.5, 3 * sigma);
}

TEST(Oracle, NeutralLiftsRecoverBase) {
  PopulationSpec s = small_spec();
  s.lift_matrix = {{1, 1, 1}, {1, 1, 1}};
  const Population pop = generate_population(s);
  Rng rng(3);
  for (std::size_t b = 0; b < 3; ++b) {
    const double p = s.base_ctr[b];
    EXPECT_NEAR(oracle_conditional_ctr(pop, 0b11, b, rng), p, 3 * std::sqrt(p * (1 - p) / 1e5));
  }
}

TEST(Oracle, MatchesClosedFormOdds) {
  const Population pop = generate_population(small_spec());
  Rng rng(4);
  const double p = odds_compose(0.02, 3.0);
  EXPECT_NEAR(oracle_conditional_ctr(pop, 0b01, 0, rng), p, 3 * std::sqrt(p * (1 - p) / 1e5));
  const double q = odds_compose(0.04, 2.0);
  EXPECT_NEAR(oracle_conditional_ctr(pop, 0b10, 2, rng), q, 3 * std::sqrt(q * (1 - q) / 1e5));
}

TEST(Oracle, GuardsLargeInstances) {
  PopulationSpec s = small_spec();
  s.num_features = 5;
  s.feature_prevalence.assign(5, 0.5);
  s.lift_matrix.assign(5, {1, 1, 1});
  const Population pop = generate_population(s);
  Rng rng(1);
  EXPECT_THROW(oracle_conditional_ctr(pop, 0, 0, rng), Error);
  const Population ok = generate_population(small_spec());
  EXPECT_THROW(oracle_conditional_ctr(ok, 0, 0, rng, 1000), Error);
}

TEST(RanksDesc, TiesGoToLowerIndex) {
  EXPECT_EQ(ranks_desc({0.1, 0.3, 0.2}), (std::vector<std::size_t>{2, 0, 1}));
  EXPECT_EQ(ranks_desc({0.5, 0.5}), (std::vector<std::size_t>{0, 1}));
}

TEST(RunSimulation, ZeroRoundsIsEmpty) {
  const Population pop = generate_population(small_spec());
  EngineConfig cfg;
  SimOptions opt;
  const SimReport r = run_simulation(pop, cfg, opt);
  EXPECT_EQ(r.impressions, 0u);
  EXPECT_EQ(r.clicks, 0u);
  EXPECT_EQ(r.lift, 0.0);
  EXPECT_FALSE(r.ranking_agreement);
}

TEST(RunSimulation, UniformPolicyMatchesAnalyticCtr) {
  PopulationSpec s = small_spec();
  s.num_users = 2000;
  const Population pop = generate_population(s);
  EngineConfig cfg;
  const std::size_t rounds = 60000;
  const PolicyRun run = run_policy(pop, cfg, Policy::UniformRandom, rounds);
  const double p = pop.expected_random_ctr();
  // arrivals are uniform over users, banners uniform over K
  EXPECT_NEAR(run.totals.ctr(), p, 3.5 * std::sqrt(p * (1 - p) / static_cast<double>(rounds)));
}

TEST(RunSimulation, DeterministicReportAndCsv) {
  const Population pop = generate_population(small_spec());
  EngineConfig cfg;
  fill_default_economics(cfg, pop.spec());
  SimOptions opt;
  opt.rounds = 3000;
  opt.measure_ranking = false;
  std::ostringstream a, b;
  const SimReport ra = run_simulation(pop, cfg, opt, &a);
  const SimReport rb = run_simulation(pop, cfg, opt, &b);
  EXPECT_EQ(report_to_json(ra).dump(), report_to_json(rb).dump());
  const std::string csv = a.str();
  EXPECT_EQ(csv, b.str());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), opt.rounds + 1);
}

TEST(RunSimulation, EngineBeatsRandomOnLiftedPopulation) {
  PopulationSpec s;
  s.seed = 8;
  s.num_users = 1000;
  s.num_features = 1;
  s.num_banners = 3;
  s.feature_prevalence = {0.5};
  s.base_ctr = {0.03, 0.02, 0.025};
  s.lift_matrix = {{1.0, 3.0, 1.0}};
  const Population pop = generate_population(s);
  EngineConfig cfg;
  SimOptions opt;
  opt.rounds = 30000;
  opt.measure_ranking = false;
  const SimReport r = run_simulation(pop, cfg, opt);
  EXPECT_EQ(r.impressions, 30000u);
  EXPECT_EQ(r.baseline_impressions, 30000u);
  EXPECT_GT(r.lift, 1.0);
}

TEST(ClicksObjective, WinnerIsArgmaxValWithoutImpressions) {
  PopulationSpec s = small_spec();
  const Population pop = generate_population(s);
  EngineConfig cfg;
  const PolicyRun run = run_policy(pop, cfg, Policy::UniformRandom, 20000);
  for (FeatureMask mask = 0; mask < 4; ++mask) {
    UserHistory h("probe");
    for (std::size_t f = 0; f < 2; ++f)
      if (mask & (1u << f)) h.record(HistoryEvent::search_query(feature_keyword(f), 0));
    const auto r = select_banner(run.stats, {h, pop.banners(), 10, Objective::Clicks}, cfg);
    std::vector<double> v;
    for (const auto& b : pop.banners()) v.push_back(val(run.stats, features_of_mask(mask, 2), b, cfg.smoothing));
    const auto best = std::max_element(v.begin(), v.end()) - v.begin();
    EXPECT_EQ(r.winner, banner_name(static_cast<std::size_t>(best)));
  }
}

}  // namespace
}  // namespace bbe::sim
