#include <algorithm>

#include <gtest/gtest.h>

#include "bbe/selector.hpp"
#include "support/generators.hpp"

namespace bbe {
namespace {

EngineConfig unit_config(std::initializer_list<BannerId> banners) {
  EngineConfig cfg;
  cfg.smoothing = {0.0, 0.01};
  for (const auto& b : banners) cfg.economics[b] = {1.0, 0.0, {}};
  return cfg;
}

TEST(SelectBanner, SingleCandidate) {
  const auto r = select_banner(GlobalStats{}, {UserHistory("u"), {"b1"}, 0, Objective::Profit}, unit_config({"b1"}));
  EXPECT_EQ(r.winner, "b1");
  EXPECT_FALSE(r.tie_broken);
  ASSERT_EQ(r.scored.size(), 1u);
}

TEST(SelectBanner, HigherScoreWins) {
  // b1: val 0.6 with cpc 0.5 -> 0.3; b2: val 0.6 with cpc 1 -> 0.6
  GlobalStats s;
  for (const char* b : {"b1", "b2"}) {
    s.banner_totals(b) = {100, 10, {}};
    s.add_imps("kw:f1", b, 100);
    s.add_clicks("kw:f1", b, 20);
    s.add_imps("kw:f2", b, 100);
    s.add_clicks("kw:f2", b, 30);
  }
  EngineConfig cfg = unit_config({"b1", "b2"});
  cfg.economics["b1"].cpc = 0.5;
  UserHistory h("u");
  h.record(HistoryEvent::search_query("f1", 1));
  h.record(HistoryEvent::search_query("f2", 2));
  const auto r = select_banner(s, {h, {"b1", "b2"}, 10, Objective::Profit}, cfg);
  EXPECT_EQ(r.winner, "b2");
  EXPECT_NEAR(r.scored[0].score, 0.3, 1e-12);
  EXPECT_NEAR(r.scored[1].score, 0.6, 1e-12);
  EXPECT_FALSE(r.tie_broken);
}

TEST(SelectBanner, ExactTieGoesToSmallestId) {
  const auto r = select_banner(GlobalStats{}, {UserHistory("u"), {"zz", "aa", "mm"}, 0, Objective::Clicks},
                               EngineConfig{});
  EXPECT_EQ(r.winner, "aa");
  EXPECT_TRUE(r.tie_broken);
}

TEST(SelectBanner, TiePrefersLeastShownToUser) {
  EngineConfig cfg;
  cfg.throttle.alpha = 0.5;
  UserHistory h("u");
  h.record(HistoryEvent::impression("aa", 0));
  // long ago, so the throttle has decayed to exactly 1
  const auto r = select_banner(GlobalStats{}, {h, {"aa", "bb"}, 1'000'000'000, Objective::Clicks}, cfg);
  EXPECT_EQ(r.scored[0].throttle, 1.0);
  EXPECT_EQ(r.winner, "bb");
  EXPECT_TRUE(r.tie_broken);
}

TEST(SelectBanner, ThrottleSteersAwayFromRecentBanner) {
  UserHistory h("u");
  h.record(HistoryEvent::impression("aa", 100));
  const auto r = select_banner(GlobalStats{}, {h, {"aa", "bb"}, 100, Objective::Clicks}, EngineConfig{});
  EXPECT_EQ(r.winner, "bb");
  EXPECT_FALSE(r.tie_broken);
}

TEST(SelectBanner, Errors) {
  EXPECT_THROW(select_banner(GlobalStats{}, {UserHistory("u"), {}, 0, Objective::Clicks}, EngineConfig{}),
               InvalidRequest);
  EXPECT_THROW(select_banner(GlobalStats{}, {UserHistory("u"), {"a", "a"}, 0, Objective::Clicks}, EngineConfig{}),
               InvalidRequest);
  try {
    select_banner(GlobalStats{}, {UserHistory("u"), {"b1", "b9"}, 0, Objective::Profit}, unit_config({"b1"}));
    FAIL() << "expected MissingEconomics";
  } catch (const MissingEconomics& ex) {
    EXPECT_EQ(ex.banner(), "b9");
  }
  // the clicks objective needs no economics
  EXPECT_NO_THROW(select_banner(GlobalStats{}, {UserHistory("u"), {"b9"}, 0, Objective::Clicks}, EngineConfig{}));
}

TEST(SelectBannerProperty, WinnerIsArgmaxAndDeterministic) {
  testing::Gen gen(41);
  for (int iter = 0; iter < 200; ++iter) {
    GlobalStats s;
    std::vector<UserHistory> users(4);
    EngineConfig cfg;
    for (const auto& [u, e] : gen.log(4, 4, 5, 300)) ingest(s, users[u], e, cfg);
    for (int b = 0; b < 5; ++b) cfg.economics["b" + std::to_string(b)] = {gen.range(0.1, 2.0), gen.range(0, 0.01), {}};
    const SelectionRequest req{users[0], {"b0", "b1", "b2", "b3", "b4"}, 6000,
                               static_cast<Objective>(gen.below(3))};
    const auto r = select_banner(s, req, cfg);
    double best = 0;
    for (const auto& sc : r.scored) best = std::max(best, sc.score);
    const auto it = std::find_if(r.scored.begin(), r.scored.end(), [&](const auto& x) { return x.banner == r.winner; });
    ASSERT_NE(it, r.scored.end());
    EXPECT_EQ(it->score, best);
    EXPECT_EQ(select_banner(s, req, cfg), r);
  }
}

}  // namespace
}  // namespace bbe
