#ifndef BBE_SELECTOR_HPP
#define BBE_SELECTOR_HPP

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "bbe/config.hpp"
#include "bbe/core_model.hpp"
#include "bbe/event_ingest.hpp"
#include "bbe/scoring.hpp"

namespace bbe {

enum class Objective {
  Clicks,     // val * throttle, i.e. unit cpc
  Profit,     // score
  ProfitPlus  // score_plus
};

struct SelectionRequest {
  UserHistory history;
  std::vector<BannerId> candidates;
  Timestamp now = 0;
  Objective objective = Objective::Profit;
};

struct ScoredBanner {
  BannerId banner;
  /// val times the counter weight.
  double val = 0.0;
  double throttle = 1.0;
  double score = 0.0;

  friend bool operator==(const ScoredBanner&, const ScoredBanner&) = default;
};

struct SelectionResult {
  BannerId winner;
  /// One entry per candidate, in request order.
  std::vector<ScoredBanner> scored;
  /// More than one candidate reached the maximum score.
  bool tie_broken = false;

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

/// Picks the candidate maximizing the objective. Exact ties go to the banner
/// this user has seen least, then to the smallest id.
inline SelectionResult select_banner(const GlobalStats& stats, const SelectionRequest& req,
                                     const EngineConfig& cfg) {
  if (req.candidates.empty()) throw InvalidRequest("candidate set is empty");
  {
    std::set<std::string_view> seen;
    for (const auto& b : req.candidates) {
      if (b.empty()) throw InvalidRequest("candidate banner id is empty");
      if (!seen.insert(b).second) throw InvalidRequest("duplicate candidate '" + b + "'");
    }
  }
  if (req.objective != Objective::Clicks) {
    for (const auto& b : req.candidates) cfg.economics_for(b);
  }

  const UserProfile profile = derive_profile(req.history);
  SelectionResult result;
  result.scored.reserve(req.candidates.size());
  for (const auto& b : req.candidates) {
    const ScoreParts p = score_parts(stats, profile, req.history, b, req.now, cfg);
    const double value = p.val * p.weight;
    double s = value * p.throttle;
    if (req.objective == Objective::Profit) {
      s = cfg.economics_for(b).cpc * value * p.throttle;
    } else if (req.objective == Objective::ProfitPlus) {
      const BannerEconomics& econ = cfg.economics_for(b);
      s = econ.imp_profit + click_value(stats, b, econ) * value * p.throttle;
    }
    result.scored.push_back({b, value, p.throttle, s});
  }

  double best = result.scored.front().score;
  for (const auto& s : result.scored) best = std::max(best, s.score);

  const ScoredBanner* winner = nullptr;
  std::size_t at_max = 0;
  for (const auto& s : result.scored) {
    if (s.score != best) continue;
    ++at_max;
    if (winner == nullptr ||
        std::forward_as_tuple(count_of(profile.impressions, s.banner), s.banner) <
            std::forward_as_tuple(count_of(profile.impressions, winner->banner), winner->banner)) {
      winner = &s;
    }
  }
  result.winner = winner->banner;
  result.tie_broken = at_max > 1;
  return result;
}

}  // namespace bbe

#endif  // BBE_SELECTOR_HPP
