#ifndef BBE_SERVICE_HPP
#define BBE_SERVICE_HPP

#include <chrono>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "bbe/config.hpp"
#include "bbe/config_json.hpp"
#include "bbe/core_model.hpp"
#include "bbe/event_ingest.hpp"
#include "bbe/persistence.hpp"
#include "bbe/selector.hpp"

namespace bbe {

struct ServiceConfig {
  std::string listen = "127.0.0.1:8080";
  EngineConfig engine;
  /// Empty disables periodic snapshots.
  std::string snapshot_path;
  std::int64_t snapshot_interval_seconds = 60;
  std::size_t max_cookie_events = kDefaultMaxCookieEvents;
  /// Events dated more than this far past the server clock are refused.
  std::int64_t max_skew_seconds = 300;
  /// Selections read a copy of the stats republished after this many writes...
  std::size_t publish_every_writes = 100;
  /// ...or once this much time has passed since the last publish.
  std::int64_t publish_interval_ms = 1000;

  void validate() const {
    engine.validate();
    if (snapshot_interval_seconds <= 0) throw Error("snapshot interval must be > 0");
    if (max_cookie_events == 0) throw Error("max cookie events must be > 0");
    if (publish_every_writes == 0) throw Error("publish_every_writes must be > 0");
  }
};

inline ServiceConfig service_config_from_json(const nlohmann::json& j) {
  ServiceConfig cfg;
  try {
    cfg.listen = j.value("listen", cfg.listen);
    if (const auto e = j.find("engine"); e != j.end()) cfg.engine = engine_config_from_json(*e);
    cfg.snapshot_path = j.value("snapshot_path", cfg.snapshot_path);
    cfg.snapshot_interval_seconds = j.value("snapshot_interval_seconds", cfg.snapshot_interval_seconds);
    cfg.max_cookie_events = j.value("max_cookie_events", cfg.max_cookie_events);
    cfg.max_skew_seconds = j.value("max_skew_seconds", cfg.max_skew_seconds);
    cfg.publish_every_writes = j.value("publish_every_writes", cfg.publish_every_writes);
    cfg.publish_interval_ms = j.value("publish_interval_ms", cfg.publish_interval_ms);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("bad service config: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

struct Response {
  int status = 200;
  std::string body;
};

inline Objective parse_objective(std::string_view s) {
  if (s == "clicks") return Objective::Clicks;
  if (s == "profit") return Objective::Profit;
  if (s == "profit_plus") return Objective::ProfitPlus;
  throw InvalidRequest("unknown objective '" + std::string(s) + "'");
}

/// JSON form of a selection, as returned by POST /v1/select.
inline nlohmann::ordered_json selection_to_json(const SelectionResult& r, const std::string& cookie) {
  nlohmann::ordered_json scores = nlohmann::ordered_json::array();
  for (const auto& s : r.scored) {
    scores.push_back({{"banner", s.banner}, {"val", s.val}, {"throttle", s.throttle}, {"score", s.score}});
  }
  return {{"banner", r.winner}, {"scores", std::move(scores)}, {"cookie", cookie}};
}

/// JSON form of GET /v1/stats.
inline nlohmann::ordered_json stats_summary(const GlobalStats& stats) {
  nlohmann::ordered_json global = nlohmann::ordered_json::object();
  for (const auto& [b, t] : stats.banners()) global[b] = {{"imps", t.imps}, {"clicks", t.clicks}};
  return {{"banners", stats.banners().size()},
          {"features", stats.features().size()},
          {"cells", stats.cell_count()},
          {"global", std::move(global)}};
}

/// Request handlers behind the HTTP routes. Thread-safe: writes to the stats
/// are serialized on one mutex, and selections score against the most
/// recently published immutable copy.
class AdService {
 public:
  using Clock = std::function<Timestamp()>;
  using UserIdSource = std::function<UserId()>;

  static Timestamp system_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  static UserIdSource random_user_ids() {
    auto rng = std::make_shared<std::mt19937_64>(std::random_device{}());
    auto mu = std::make_shared<std::mutex>();
    return [rng, mu] {
      std::lock_guard lock(*mu);
      std::ostringstream os;
      os << std::hex << (*rng)();
      return "u" + os.str();
    };
  }

  explicit AdService(ServiceConfig cfg, Clock clock = system_now, UserIdSource ids = random_user_ids())
      : cfg_(std::move(cfg)),
        clock_(std::move(clock)),
        ids_(std::move(ids)),
        published_(std::make_shared<const GlobalStats>()),
        last_publish_(std::chrono::steady_clock::now()) {
    cfg_.validate();
  }

  const ServiceConfig& config() const noexcept { return cfg_; }

  Response handle_select(std::string_view body) {
    nlohmann::json req;
    SelectionRequest sel;
    try {
      req = parse_body(body);
      sel.history = cookie_from(req);
      sel.now = now_from(req);
      const auto obj = req.find("objective");
      if (obj != req.end()) {
        if (!obj->is_string()) return error(400, "objective must be a string");
        sel.objective = parse_objective(obj->get<std::string>());
      }
      const auto cands = req.find("candidates");
      if (cands == req.end() || !cands->is_array()) return error(400, "candidates must be an array");
      for (const auto& c : *cands) {
        if (!c.is_string()) return error(400, "candidate ids must be strings");
        sel.candidates.push_back(c.get<std::string>());
      }
    } catch (const DecodeError& ex) {
      return error(400, ex.what());
    } catch (const InvalidRequest& ex) {
      return error(400, ex.what());
    }

    try {
      refresh_if_stale();
      const SelectionResult result = select_banner(*published(), sel, cfg_.engine);
      UserHistory history = std::move(sel.history);
      write(history, HistoryEvent::impression(result.winner, sel.now));
      history.truncate_to_newest(cfg_.max_cookie_events);
      return {200, selection_to_json(result, encode_history(history)).dump()};
    } catch (const InvalidRequest& ex) {
      return error(422, ex.what());
    } catch (const MissingEconomics& ex) {
      return error(422, ex.what());
    } catch (const ClockSkew& ex) {
      return error(409, ex.what());
    } catch (const InvalidEvent& ex) {
      return error(400, ex.what());
    }
  }

  Response handle_event(std::string_view body) {
    try {
      const nlohmann::json req = parse_body(body);
      UserHistory history = cookie_from(req);
      const Timestamp now = now_from(req);
      const auto ev = req.find("event");
      if (ev == req.end() || !ev->is_object()) return error(400, "event must be an object");
      const auto kind = ev->find("kind");
      const auto obj = ev->find("obj");
      const auto time = ev->find("time");
      if (kind == ev->end() || !kind->is_string() || obj == ev->end() || !obj->is_string() ||
          time == ev->end() || !time->is_number_integer()) {
        return error(400, "event needs string kind, string obj and integer time");
      }
      const HistoryEvent event{parse_kind_tag(kind->get<std::string>()), obj->get<std::string>(),
                               time->get<Timestamp>()};
      if (event.time > now + cfg_.max_skew_seconds) return error(409, "event is dated too far in the future");
      write(history, event);
      history.truncate_to_newest(cfg_.max_cookie_events);
      nlohmann::ordered_json out = {{"cookie", encode_history(history)}};
      return {200, out.dump()};
    } catch (const DecodeError& ex) {
      return error(400, ex.what());
    } catch (const InvalidRequest& ex) {
      return error(400, ex.what());
    } catch (const InvalidEvent& ex) {
      return error(400, ex.what());
    }
  }

  Response handle_stats() const {
    std::lock_guard lock(write_mu_);
    return {200, stats_summary(live_).dump()};
  }

  /// The copy selections currently score against.
  std::shared_ptr<const GlobalStats> published() const {
    std::lock_guard lock(publish_mu_);
    return published_;
  }

  /// Republishes the live stats immediately.
  void publish() {
    std::lock_guard lock(write_mu_);
    publish_locked();
  }

  std::string snapshot_text() const {
    std::lock_guard lock(write_mu_);
    return snapshot(live_);
  }

  /// Replaces all counters with the snapshot contents and publishes them.
  void restore_text(std::string_view text) {
    GlobalStats restored = restore(text);
    std::lock_guard lock(write_mu_);
    live_ = std::move(restored);
    publish_locked();
  }

  /// Writes the snapshot to `path` through a temporary file and rename.
  void save_snapshot(const std::string& path) const {
    const std::string text = snapshot_text();
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write snapshot to " + tmp);
      out << text;
      if (!out.flush()) throw Error("cannot write snapshot to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename snapshot into " + path);
  }

  /// Loads the snapshot at `path`. Returns false when the file does not exist.
  bool load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream buf;
    buf << in.rdbuf();
    restore_text(buf.str());
    return true;
  }

 private:
  static Response error(int status, std::string_view message) {
    return {status, nlohmann::json{{"error", message}}.dump()};
  }

  static nlohmann::json parse_body(std::string_view body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InvalidRequest("request body must be a JSON object");
    return j;
  }

  /// Accepts the cookie as the encoded string, as an inline object, or null.
  UserHistory cookie_from(const nlohmann::json& req) const {
    const auto c = req.find("cookie");
    if (c == req.end() || c->is_null()) return UserHistory(ids_());
    if (c->is_string()) return decode_history(c->get<std::string>(), cfg_.max_cookie_events).history;
    return history_from_json(*c, cfg_.max_cookie_events).history;
  }

  Timestamp now_from(const nlohmann::json& req) const {
    const auto n = req.find("now");
    if (n == req.end() || n->is_null()) return clock_();
    if (!n->is_number_integer()) throw InvalidRequest("now must be integer seconds");
    return n->get<Timestamp>();
  }

  void write(UserHistory& history, const HistoryEvent& event) {
    std::lock_guard lock(write_mu_);
    ingest(live_, history, event, cfg_.engine);
    ++writes_since_publish_;
    const auto elapsed = std::chrono::steady_clock::now() - last_publish_;
    if (writes_since_publish_ >= cfg_.publish_every_writes ||
        elapsed >= std::chrono::milliseconds(cfg_.publish_interval_ms)) {
      publish_locked();
    }
  }

  void refresh_if_stale() {
    std::lock_guard lock(write_mu_);
    if (writes_since_publish_ != 0 &&
        std::chrono::steady_clock::now() - last_publish_ >= std::chrono::milliseconds(cfg_.publish_interval_ms)) {
      publish_locked();
    }
  }

  void publish_locked() {
    auto copy = std::make_shared<const GlobalStats>(live_);
    {
      std::lock_guard lock(publish_mu_);
      published_ = std::move(copy);
    }
    writes_since_publish_ = 0;
    last_publish_ = std::chrono::steady_clock::now();
  }

  ServiceConfig cfg_;
  Clock clock_;
  UserIdSource ids_;

  mutable std::mutex write_mu_;
  GlobalStats live_;
  std::size_t writes_since_publish_ = 0;

  mutable std::mutex publish_mu_;
  std::shared_ptr<const GlobalStats> published_;
  std::chrono::steady_clock::time_point last_publish_;
};

}  // namespace bbe

#endif  // BBE_SERVICE_HPP
