#ifndef BBE_SCORING_HPP
#define BBE_SCORING_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ranges>
#include <span>
#include <vector>

#include "bbe/config.hpp"
#include "bbe/core_model.hpp"
#include "bbe/event_ingest.hpp"

namespace bbe {

/// CTR estimates are clamped to [kCtrEpsilon, 1 - kCtrEpsilon].
inline constexpr double kCtrEpsilon = 1e-9;

inline double clamp_ctr(double p) { return std::clamp(p, kCtrEpsilon, 1.0 - kCtrEpsilon); }

/// Smoothed click-through rate of `banner` among all users.
inline double ctr_global(const GlobalStats& stats, std::string_view banner, const SmoothingParams& sp) {
  const BannerTotals t = stats.banner(banner);
  const double denom = static_cast<double>(t.imps) + sp.kappa;
  if (denom == 0.0) return clamp_ctr(sp.prior_ctr);
  return clamp_ctr((static_cast<double>(t.clicks) + sp.kappa * sp.prior_ctr) / denom);
}

/// Smoothed click-through rate of `banner` among users holding `feature`. The
/// pseudo-counts carry the global CTR, so an empty cell returns it unchanged.
inline double ctr_feature(const GlobalStats& stats, std::string_view feature, std::string_view banner,
                          const SmoothingParams& sp) {
  const double g = ctr_global(stats, banner, sp);
  const CellCounts c = stats.cell(feature, banner);
  const double denom = static_cast<double>(c.imps) + sp.kappa;
  if (denom == 0.0) return g;
  return clamp_ctr((static_cast<double>(c.clicks) + sp.kappa * g) / denom);
}

/// Naive-Bayes value ctr(b)^(1-n) * prod_i ctr_{f_i}(b), proportional to the
/// click probability given the features when they are independent. Evaluated
/// in log space since n may be large.
template <std::ranges::input_range Features>
double val(const GlobalStats& stats, const Features& features, std::string_view banner,
           const SmoothingParams& sp) {
  const double g = ctr_global(stats, banner, sp);
  double log_sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : features) {
    log_sum += std::log(ctr_feature(stats, f, banner, sp));
    ++n;
  }
  if (n == 0) return g;
  return std::exp((1.0 - static_cast<double>(n)) * std::log(g) + log_sum);
}

/// Arithmetic mean of the feature counters. Throws on an empty list.
inline double weight_W(std::span<const double> counters) {
  if (counters.empty()) throw Error("weight_W needs at least one counter");
  return std::accumulate(counters.begin(), counters.end(), 0.0) / static_cast<double>(counters.size());
}

/// The user's feature counters, optionally divided by the population mean
/// counter of each feature. Features without population data stay raw.
inline std::vector<double> feature_counters(const UserProfile& profile, const GlobalStats& stats,
                                            bool normalize) {
  std::vector<double> out;
  out.reserve(profile.features.size());
  for (const auto& [f, c] : profile.features) {
    double v = static_cast<double>(c);
    if (normalize) {
      const FeatureTotals t = stats.feature(f);
      if (t.users != 0 && t.occurrences != 0)
        v /= static_cast<double>(t.occurrences) / static_cast<double>(t.users);
    }
    out.push_back(v);
  }
  return out;
}

/// Boredom damping prod_i (1 - alpha * 2^(-(now - t_i)/h)) over the user's
/// impressions of `banner`. Always in (0, 1]. Throws ClockSkew when an
/// impression lies after `now`.
inline double throttle(const UserHistory& history, std::string_view banner, Timestamp now,
                       const ThrottleParams& tp) {
  double product = 1.0;
  for (const auto& e : history.events()) {
    if (e.kind.type != EventType::Impression || e.obj != banner) continue;
    if (e.time > now) throw ClockSkew("impression of '" + e.obj + "' is dated after now");
    const double age = static_cast<double>(now - e.time) / static_cast<double>(tp.half_life_seconds);
    product *= 1.0 - tp.alpha * std::exp2(-age);
  }
  return std::max(product, std::numeric_limits<double>::min());
}

/// Per-banner pieces of a score, kept for audit output.
struct ScoreParts {
  double val = 0.0;
  /// Counter weight W, 1 when weighting is off or the user has no features.
  double weight = 1.0;
  double throttle = 1.0;
};

inline ScoreParts score_parts(const GlobalStats& stats, const UserProfile& profile,
                              const UserHistory& history, const BannerId& banner, Timestamp now,
                              const EngineConfig& cfg) {
  ScoreParts p;
  p.val = val(stats, std::views::keys(profile.features), banner, cfg.smoothing);
  if (cfg.use_counter_weights && !profile.features.empty())
    p.weight = weight_W(feature_counters(profile, stats, cfg.normalize_counters));
  p.throttle = throttle(history, banner, now, cfg.throttle);
  return p;
}

/// cpc extended by the expected registration profit per click, using the
/// global registrations-per-click rate of the banner.
inline double click_value(const GlobalStats& stats, const BannerId& banner, const BannerEconomics& econ) {
  double value = econ.cpc;
  const BannerTotals t = stats.banner(banner);
  if (t.clicks == 0) return value;
  for (const auto& [level, profit] : econ.reg_profit) {
    value += profit * static_cast<double>(count_of(t.registrations, level)) / static_cast<double>(t.clicks);
  }
  return value;
}

/// cpc(b) * val * W * throttle(b).
inline double score(const GlobalStats& stats, const UserHistory& history, const BannerId& banner,
                    Timestamp now, const EngineConfig& cfg) {
  const BannerEconomics& econ = cfg.economics_for(banner);
  const ScoreParts p = score_parts(stats, derive_profile(history), history, banner, now, cfg);
  return econ.cpc * p.val * p.weight * p.throttle;
}

/// imp_profit(b) + click_value(b) * val * W * throttle(b).
inline double score_plus(const GlobalStats& stats, const UserHistory& history, const BannerId& banner,
                         Timestamp now, const EngineConfig& cfg) {
  const BannerEconomics& econ = cfg.economics_for(banner);
  const ScoreParts p = score_parts(stats, derive_profile(history), history, banner, now, cfg);
  return econ.imp_profit + click_value(stats, banner, econ) * p.val * p.weight * p.throttle;
}

}  // namespace bbe

#endif  // BBE_SCORING_HPP
