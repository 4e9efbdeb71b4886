#ifndef BBE_HTTP_HPP
#define BBE_HTTP_HPP

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>

#include "bbe/service.hpp"

namespace bbe {

/// Splits "host:port". A bare port binds 0.0.0.0.
inline std::pair<std::string, int> parse_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  try {
    if (colon == std::string::npos) return {"0.0.0.0", std::stoi(listen)};
    return {listen.substr(0, colon), std::stoi(listen.substr(colon + 1))};
  } catch (const std::logic_error&) {
    throw Error("bad listen address '" + listen + "'");
  }
}

/// Routes POST /v1/select, POST /v1/event and GET /v1/stats onto `service`.
inline void mount_routes(httplib::Server& server, AdService& service) {
  const auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Post("/v1/select", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.handle_select(req.body));
  });
  server.Post("/v1/event", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.handle_event(req.body));
  });
  server.Get("/v1/stats", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.handle_stats());
  });
}

/// Writes a snapshot every `interval_seconds` until stopped, and once more on stop.
class SnapshotWriter {
 public:
  SnapshotWriter(const AdService& service, std::string path, std::int64_t interval_seconds)
      : service_(service), path_(std::move(path)), interval_(interval_seconds) {
    if (!path_.empty()) thread_ = std::thread([this] { loop(); });
  }

  SnapshotWriter(const SnapshotWriter&) = delete;
  SnapshotWriter& operator=(const SnapshotWriter&) = delete;

  ~SnapshotWriter() { stop(); }

  void stop() {
    {
      std::lock_guard lock(mu_);
      if (stopping_) return;
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
    if (!path_.empty()) write_once();
  }

 private:
  void loop() {
    std::unique_lock lock(mu_);
    while (!cv_.wait_for(lock, std::chrono::seconds(interval_), [this] { return stopping_; })) {
      lock.unlock();
      write_once();
      lock.lock();
    }
  }

  void write_once() {
    try {
      service_.save_snapshot(path_);
    } catch (const std::exception& ex) {
      std::cerr << "snapshot failed: " << ex.what() << '\n';
    }
  }

  const AdService& service_;
  std::string path_;
  std::int64_t interval_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace bbe

#endif  // BBE_HTTP_HPP
