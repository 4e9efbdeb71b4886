#ifndef BBE_CONFIG_JSON_HPP
#define BBE_CONFIG_JSON_HPP

#include <string>

#include <json.hpp>

#include "bbe/config.hpp"

namespace bbe {

// Engine configuration as JSON. Every key is optional; missing keys keep the
// defaults.
//
//   {"smoothing": {"kappa": 10, "prior_ctr": 0.01},
//    "throttle": {"alpha": 0.5, "half_life_seconds": 86400},
//    "unique_only": false, "use_counter_weights": false, "normalize_counters": false,
//    "economics": {"b1": {"cpc": 0.5, "imp_profit": 0.001, "reg_profit": {"1": 10}}}}

inline EngineConfig engine_config_from_json(const nlohmann::json& j) {
  EngineConfig cfg;
  try {
    if (const auto s = j.find("smoothing"); s != j.end()) {
      cfg.smoothing.kappa = s->value("kappa", cfg.smoothing.kappa);
      cfg.smoothing.prior_ctr = s->value("prior_ctr", cfg.smoothing.prior_ctr);
    }
    if (const auto t = j.find("throttle"); t != j.end()) {
      cfg.throttle.alpha = t->value("alpha", cfg.throttle.alpha);
      cfg.throttle.half_life_seconds = t->value("half_life_seconds", cfg.throttle.half_life_seconds);
    }
    cfg.unique_only = j.value("unique_only", cfg.unique_only);
    cfg.use_counter_weights = j.value("use_counter_weights", cfg.use_counter_weights);
    cfg.normalize_counters = j.value("normalize_counters", cfg.normalize_counters);
    if (const auto econ = j.find("economics"); econ != j.end()) {
      for (const auto& [banner, e] : econ->items()) {
        BannerEconomics be;
        be.cpc = e.value("cpc", 0.0);
        be.imp_profit = e.value("imp_profit", 0.0);
        if (const auto reg = e.find("reg_profit"); reg != e.end()) {
          for (const auto& [level, profit] : reg->items()) be.reg_profit[std::stoi(level)] = profit.get<double>();
        }
        cfg.economics[banner] = std::move(be);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("bad engine config: ") + ex.what());
  } catch (const std::logic_error& ex) {
    throw Error(std::string("bad engine config: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace bbe

#endif  // BBE_CONFIG_JSON_HPP
