// HTTP front end: POST /v1/select, POST /v1/event, GET /v1/stats.
//
//   bbe_server --config service.json
//
// BBE_LISTEN overrides the configured listen address.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "bbe/http.hpp"
#include "bbe/service.hpp"

namespace {
httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral banner selection service"};
  std::string config_path;
  app.add_option("--config", config_path, "Service config (JSON)")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    bbe::ServiceConfig cfg = bbe::service_config_from_json(nlohmann::json::parse(in));
    if (const char* env = std::getenv("BBE_LISTEN"); env != nullptr && *env != '\0') cfg.listen = env;
    const auto [host, port] = bbe::parse_listen(cfg.listen);

    bbe::AdService service(cfg);
    if (!cfg.snapshot_path.empty() && service.load_snapshot(cfg.snapshot_path))
      std::cerr << "restored stats from " << cfg.snapshot_path << '\n';
    bbe::SnapshotWriter snapshots(service, cfg.snapshot_path, cfg.snapshot_interval_seconds);

    httplib::Server server;
    bbe::mount_routes(server, service);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    std::cerr << "listening on " << host << ':' << port << '\n';
    if (!server.listen(host, port)) {
      std::cerr << "cannot listen on " << cfg.listen << '\n';
      return 1;
    }
    snapshots.stop();
  } catch (const std::exception& ex) {
    std::cerr << "bbe_server: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
