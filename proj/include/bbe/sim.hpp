#ifndef BBE_SIM_HPP
#define BBE_SIM_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbe/config.hpp"
#include "bbe/config_json.hpp"
#include "bbe/core_model.hpp"
#include "bbe/event_ingest.hpp"
#include "bbe/scoring.hpp"
#include "bbe/selector.hpp"

namespace bbe::sim {

/// mt19937_64 with integer-only derivations, so a seed reproduces the same
/// stream on every platform (the std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n) by rejection, no modulo bias.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Distinct stream for `stream` under one user-facing seed.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct PopulationSpec {
  std::uint64_t seed = 1;
  std::size_t num_users = 1000;
  std::size_t num_features = 0;
  std::size_t num_banners = 0;
  /// Probability that a user holds each feature.
  std::vector<double> feature_prevalence;
  /// Click probability of each banner for a user without features.
  std::vector<double> base_ctr;
  /// lift_matrix[f][b] multiplies the click odds of banner b for holders of f.
  std::vector<std::vector<double>> lift_matrix;
  /// Times each held feature is emitted as a search event on the user's first visit.
  std::size_t events_per_user = 1;
  std::int64_t seconds_per_round = 60;
  /// Per-banner profit per click, 1 when omitted.
  std::vector<double> cpc;

  void validate() const {
    if (num_users == 0 || num_banners == 0) throw Error("population needs users and banners");
    if (feature_prevalence.size() != num_features) throw Error("feature_prevalence size != num_features");
    if (base_ctr.size() != num_banners) throw Error("base_ctr size != num_banners");
    if (lift_matrix.size() != num_features) throw Error("lift_matrix rows != num_features");
    for (double p : feature_prevalence)
      if (!(p > 0.0 && p < 1.0)) throw Error("feature prevalence must lie in (0,1)");
    for (double p : base_ctr)
      if (!(p > 0.0 && p < 1.0)) throw Error("base ctr must lie in (0,1)");
    for (const auto& row : lift_matrix) {
      if (row.size() != num_banners) throw Error("lift_matrix columns != num_banners");
      for (double l : row)
        if (!(l > 0.0) || !std::isfinite(l)) throw Error("lift factors must be positive");
    }
    if (!cpc.empty() && cpc.size() != num_banners) throw Error("cpc size != num_banners");
    for (double c : cpc)
      if (!(c >= 0.0)) throw Error("cpc must be >= 0");
    if (events_per_user == 0) throw Error("events_per_user must be >= 1");
    if (seconds_per_round < 0) throw Error("seconds_per_round must be >= 0");
  }

  double cpc_of(std::size_t b) const { return cpc.empty() ? 1.0 : cpc[b]; }
};

inline PopulationSpec population_spec_from_json(const nlohmann::json& j) {
  PopulationSpec s;
  try {
    s.seed = j.value("seed", s.seed);
    s.feature_prevalence = j.at("feature_prevalence").get<std::vector<double>>();
    s.base_ctr = j.at("base_ctr").get<std::vector<double>>();
    s.lift_matrix = j.at("lift_matrix").get<std::vector<std::vector<double>>>();
    s.num_users = j.value("num_users", s.num_users);
    s.num_features = j.value("num_features", s.feature_prevalence.size());
    s.num_banners = j.value("num_banners", s.base_ctr.size());
    s.events_per_user = j.value("events_per_user", s.events_per_user);
    s.seconds_per_round = j.value("seconds_per_round", s.seconds_per_round);
    s.cpc = j.value("cpc", s.cpc);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("bad population spec: ") + ex.what());
  }
  s.validate();
  return s;
}

inline BannerId banner_name(std::size_t b) { return "b" + std::to_string(b); }
inline std::string feature_keyword(std::size_t f) { return "f" + std::to_string(f); }
/// The engine-side id of simulated feature f.
inline FeatureId feature_name(std::size_t f) { return "kw:" + feature_keyword(f); }

using FeatureMask = std::uint32_t;

struct SimUser {
  FeatureMask features = 0;
  /// Ground-truth click probability per banner.
  std::vector<double> click_prob;
};

/// Users with independent features and click probabilities composed
/// multiplicatively in odds space.
class Population {
 public:
  static Population generate(const PopulationSpec& spec) {
    spec.validate();
    if (spec.num_features > 32) throw Error("at most 32 simulated features");
    Population pop;
    pop.spec_ = spec;
    Rng rng(stream_seed(spec.seed, 0));
    pop.users_.reserve(spec.num_users);
    for (std::size_t u = 0; u < spec.num_users; ++u) {
      SimUser user;
      for (std::size_t f = 0; f < spec.num_features; ++f) {
        if (rng.bernoulli(spec.feature_prevalence[f])) user.features |= FeatureMask{1} << f;
      }
      user.click_prob.resize(spec.num_banners);
      for (std::size_t b = 0; b < spec.num_banners; ++b) user.click_prob[b] = pop.click_probability(user.features, b);
      pop.users_.push_back(std::move(user));
    }
    return pop;
  }

  /// Ground-truth P(click on b) for a user holding exactly `mask`.
  double click_probability(FeatureMask mask, std::size_t banner) const {
    const double base = spec_.base_ctr[banner];
    double odds = base / (1.0 - base);
    for (std::size_t f = 0; f < spec_.num_features; ++f) {
      if (mask & (FeatureMask{1} << f)) odds *= spec_.lift_matrix[f][banner];
    }
    return odds / (1.0 + odds);
  }

  const PopulationSpec& spec() const noexcept { return spec_; }
  const std::vector<SimUser>& users() const noexcept { return users_; }

  std::vector<BannerId> banners() const {
    std::vector<BannerId> out;
    for (std::size_t b = 0; b < spec_.num_banners; ++b) out.push_back(banner_name(b));
    return out;
  }

  /// Population-weighted mean click probability of a uniformly random banner.
  double expected_random_ctr() const {
    double sum = 0.0;
    for (const auto& u : users_)
      for (double p : u.click_prob) sum += p;
    return sum / static_cast<double>(users_.size() * spec_.num_banners);
  }

 private:
  PopulationSpec spec_;
  std::vector<SimUser> users_;
};

inline Population generate_population(const PopulationSpec& spec) { return Population::generate(spec); }

inline constexpr std::size_t kOracleMaxFeatures = 4;
inline constexpr std::size_t kOracleMaxBanners = 5;
inline constexpr std::size_t kOracleMinSamples = 100000;

/// Monte Carlo estimate of P(click on banner | user holds exactly `mask`),
/// drawing Bernoulli clicks from the ground truth. Small instances only.
inline double oracle_conditional_ctr(const Population& pop, FeatureMask mask, std::size_t banner, Rng& rng,
                                     std::size_t samples = kOracleMinSamples) {
  if (pop.spec().num_features > kOracleMaxFeatures || pop.spec().num_banners > kOracleMaxBanners)
    throw Error("oracle instance too large");
  if (samples < kOracleMinSamples) throw Error("oracle needs at least 100000 samples");
  if (banner >= pop.spec().num_banners) throw Error("banner out of range");
  const double p = pop.click_probability(mask, banner);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) hits += rng.bernoulli(p) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples);
}

inline std::vector<FeatureId> features_of_mask(FeatureMask mask, std::size_t num_features) {
  std::vector<FeatureId> out;
  for (std::size_t f = 0; f < num_features; ++f)
    if (mask & (FeatureMask{1} << f)) out.push_back(feature_name(f));
  return out;
}

/// Rank of each entry (0 = largest); ties go to the lower index.
inline std::vector<std::size_t> ranks_desc(const std::vector<double>& xs) {
  std::vector<std::size_t> rank(xs.size(), 0);
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (xs[j] > xs[i] || (xs[j] == xs[i] && j < i)) ++rank[i];
  return rank;
}

/// Fraction of (feature subset, banner) cells on which the banner's rank
/// under the engine's val equals its rank under the oracle.
inline double ranking_agreement(const Population& pop, const GlobalStats& stats, const SmoothingParams& sp, Rng& rng,
                                std::size_t samples = kOracleMinSamples) {
  const std::size_t nf = pop.spec().num_features;
  const std::size_t nb = pop.spec().num_banners;
  std::size_t agree = 0;
  std::size_t total = 0;
  for (FeatureMask mask = 0; mask < (FeatureMask{1} << nf); ++mask) {
    const auto feats = features_of_mask(mask, nf);
    std::vector<double> engine(nb), oracle(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      engine[b] = val(stats, feats, banner_name(b), sp);
      oracle[b] = oracle_conditional_ctr(pop, mask, b, rng, samples);
    }
    const auto re = ranks_desc(engine);
    const auto ro = ranks_desc(oracle);
    for (std::size_t b = 0; b < nb; ++b) agree += re[b] == ro[b] ? 1 : 0;
    total += nb;
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

enum class Policy { Engine, UniformRandom };

struct SimOptions {
  Policy policy = Policy::Engine;
  std::size_t rounds = 0;
  Objective objective = Objective::Clicks;
  /// Report ranking agreement on small instances.
  bool measure_ranking = true;
};

struct RunTotals {
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;
  double profit = 0.0;

  double ctr() const { return impressions == 0 ? 0.0 : static_cast<double>(clicks) / static_cast<double>(impressions); }
};

struct SimReport {
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;
  double ctr = 0.0;
  double profit = 0.0;
  std::uint64_t baseline_impressions = 0;
  std::uint64_t baseline_clicks = 0;
  double baseline_ctr = 0.0;
  /// ctr / baseline_ctr, 0 when the baseline saw no clicks.
  double lift = 0.0;
  std::optional<double> ranking_agreement;
};

inline nlohmann::ordered_json report_to_json(const SimReport& r) {
  nlohmann::ordered_json j = {{"impressions", r.impressions},
                              {"clicks", r.clicks},
                              {"ctr", r.ctr},
                              {"profit", r.profit},
                              {"baseline_impressions", r.baseline_impressions},
                              {"baseline_clicks", r.baseline_clicks},
                              {"baseline_ctr", r.baseline_ctr},
                              {"lift", r.lift}};
  j["ranking_agreement"] = r.ranking_agreement ? nlohmann::ordered_json(*r.ranking_agreement) : nullptr;
  return j;
}

inline constexpr const char* kCsvHeader = "round,time,user,banner,clicked,cum_impressions,cum_clicks,cum_ctr,cum_profit";

/// Engine state driven by one policy run. Only public ingest/select calls
/// touch it.
struct PolicyRun {
  RunTotals totals;
  GlobalStats stats;
};

/// Replays `rounds` of arrival, selection, Bernoulli click and ingestion.
/// Arrivals, clicks and random choices come from separate seeded streams so
/// both policies face the same arrival sequence.
inline PolicyRun run_policy(const Population& pop, const EngineConfig& cfg, Policy policy, std::size_t rounds,
                            Objective objective = Objective::Clicks, std::ostream* csv = nullptr) {
  const auto& spec = pop.spec();
  Rng arrivals(stream_seed(spec.seed, 1));
  Rng click_draws(stream_seed(spec.seed, 2));
  Rng choices(stream_seed(spec.seed, 3));

  const std::vector<BannerId> banners = pop.banners();
  std::vector<UserHistory> histories;
  histories.reserve(pop.users().size());
  for (std::size_t u = 0; u < pop.users().size(); ++u) histories.emplace_back("sim-u" + std::to_string(u));
  std::vector<bool> introduced(pop.users().size(), false);

  PolicyRun run;
  if (csv != nullptr) *csv << kCsvHeader << '\n';
  for (std::size_t round = 0; round < rounds; ++round) {
    const Timestamp now = static_cast<Timestamp>(round) * spec.seconds_per_round;
    const std::size_t u = arrivals.index(pop.users().size());
    const SimUser& user = pop.users()[u];
    UserHistory& history = histories[u];

    if (!introduced[u]) {
      for (std::size_t f = 0; f < spec.num_features; ++f) {
        if (!(user.features & (FeatureMask{1} << f))) continue;
        for (std::size_t k = 0; k < spec.events_per_user; ++k)
          ingest(run.stats, history, HistoryEvent::search_query(feature_keyword(f), now), cfg);
      }
      introduced[u] = true;
    }

    std::size_t chosen = 0;
    if (policy == Policy::UniformRandom) {
      chosen = choices.index(banners.size());
    } else {
      const SelectionResult r = select_banner(run.stats, {history, banners, now, objective}, cfg);
      chosen = static_cast<std::size_t>(std::stoul(r.winner.substr(1)));
    }

    ingest(run.stats, history, HistoryEvent::impression(banners[chosen], now), cfg);
    ++run.totals.impressions;
    const bool clicked = click_draws.bernoulli(user.click_prob[chosen]);
    if (clicked) {
      ingest(run.stats, history, HistoryEvent::click(banners[chosen], now), cfg);
      ++run.totals.clicks;
      run.totals.profit += spec.cpc_of(chosen);
    }
    if (csv != nullptr) {
      *csv << round << ',' << now << ',' << u << ',' << banners[chosen] << ',' << (clicked ? 1 : 0) << ','
           << run.totals.impressions << ',' << run.totals.clicks << ',' << run.totals.ctr() << ','
           << run.totals.profit << '\n';
    }
  }
  return run;
}

/// Runs the chosen policy plus the uniform-random baseline on the same
/// population and seed.
inline SimReport run_simulation(const Population& pop, const EngineConfig& cfg, const SimOptions& opt,
                                std::ostream* csv = nullptr) {
  SimReport report;
  if (opt.rounds == 0) return report;

  const PolicyRun main = run_policy(pop, cfg, opt.policy, opt.rounds, opt.objective, csv);
  const RunTotals base = opt.policy == Policy::UniformRandom
                             ? main.totals
                             : run_policy(pop, cfg, Policy::UniformRandom, opt.rounds, opt.objective).totals;

  report.impressions = main.totals.impressions;
  report.clicks = main.totals.clicks;
  report.ctr = main.totals.ctr();
  report.profit = main.totals.profit;
  report.baseline_impressions = base.impressions;
  report.baseline_clicks = base.clicks;
  report.baseline_ctr = base.ctr();
  report.lift = base.clicks == 0 ? 0.0 : report.ctr / report.baseline_ctr;

  const auto& spec = pop.spec();
  if (opt.measure_ranking && spec.num_features <= kOracleMaxFeatures && spec.num_banners <= kOracleMaxBanners) {
    Rng oracle_rng(stream_seed(spec.seed, 4));
    report.ranking_agreement = ranking_agreement(pop, main.stats, cfg.smoothing, oracle_rng);
  }
  return report;
}

/// One-sided two-proportion z statistic for "ctr exceeds baseline_ctr".
inline double lift_z_score(const SimReport& r) {
  const double p1 = r.ctr;
  const double p2 = r.baseline_ctr;
  const double var = p1 * (1.0 - p1) / static_cast<double>(r.impressions) +
                     p2 * (1.0 - p2) / static_cast<double>(r.baseline_impressions);
  return var > 0.0 ? (p1 - p2) / std::sqrt(var) : 0.0;
}

/// Economics giving each simulated banner its configured cpc, for configs
/// that do not list them.
inline void fill_default_economics(EngineConfig& cfg, const PopulationSpec& spec) {
  for (std::size_t b = 0; b < spec.num_banners; ++b) {
    cfg.economics.try_emplace(banner_name(b), BannerEconomics{spec.cpc_of(b), 0.0, {}});
  }
}

}  // namespace bbe::sim

#endif  // BBE_SIM_HPP
