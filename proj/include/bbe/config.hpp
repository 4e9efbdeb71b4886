#ifndef BBE_CONFIG_HPP
#define BBE_CONFIG_HPP

#include <cstdint>
#include <map>

#include "bbe/core_model.hpp"
#include "bbe/error.hpp"

namespace bbe {

/// Additive smoothing: `kappa` pseudo-impressions carrying the prior CTR.
struct SmoothingParams {
  double kappa = 10.0;
  /// Used as the global prior when a banner has no data yet.
  double prior_ctr = 0.01;

  void validate() const {
    if (!(kappa >= 0.0)) throw Error("smoothing kappa must be >= 0");
    if (!(prior_ctr > 0.0 && prior_ctr < 1.0)) throw Error("prior_ctr must lie in (0,1)");
  }
};

struct ThrottleParams {
  double alpha = 0.5;
  std::int64_t half_life_seconds = 86400;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("throttle alpha must lie in (0,1)");
    if (half_life_seconds <= 0) throw Error("throttle half-life must be > 0");
  }
};

struct BannerEconomics {
  double cpc = 0.0;
  double imp_profit = 0.0;
  /// Profit per registration, keyed by registration level.
  std::map<int, double> reg_profit;

  void validate() const {
    if (!(cpc >= 0.0) || !(imp_profit >= 0.0)) throw Error("banner profits must be >= 0");
    for (const auto& [level, profit] : reg_profit) {
      if (level < 1) throw Error("registration level must be >= 1");
      if (!(profit >= 0.0)) throw Error("registration profit must be >= 0");
    }
  }
};

struct EngineConfig {
  SmoothingParams smoothing;
  ThrottleParams throttle;
  /// Count only a user's first click on a banner into the click matrix.
  bool unique_only = false;
  /// Multiply val by the mean of the user's feature counters.
  bool use_counter_weights = false;
  /// Divide each counter by its population mean before averaging.
  bool normalize_counters = false;
  std::map<BannerId, BannerEconomics> economics;

  const BannerEconomics& economics_for(const BannerId& b) const {
    const auto it = economics.find(b);
    if (it == economics.end()) throw MissingEconomics(b);
    return it->second;
  }

  void validate() const {
    smoothing.validate();
    throttle.validate();
    for (const auto& [_, e] : economics) e.validate();
  }
};

}  // namespace bbe

#endif  // BBE_CONFIG_HPP
