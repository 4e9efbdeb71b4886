// Synthetic-traffic simulator.
//
//   sim run --spec population.json --policy engine|random --rounds N [--seed S] [--out report.csv]
//
// Prints the SimReport as JSON on stdout and writes the per-round time series
// to --out.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbe/config_json.hpp"
#include "bbe/service.hpp"
#include "bbe/sim.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic traffic simulator for the banner selection engine"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Simulate traffic against one policy and the uniform baseline");
  std::string spec_path;
  std::string policy = "engine";
  std::size_t rounds = 0;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  run->add_option("--spec", spec_path, "Population spec (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--policy", policy, "Serving policy")
      ->check(CLI::IsMember(std::map<std::string, int>{{"engine", 0}, {"random", 1}}));
  run->add_option("--rounds", rounds, "Number of served impressions")->required();
  run->add_option("--seed", seed, "Overrides the spec's seed");
  run->add_option("--out", out_path, "CSV time series output");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(spec_path);
    const nlohmann::json j = nlohmann::json::parse(in);
    bbe::sim::PopulationSpec spec = bbe::sim::population_spec_from_json(j);
    if (seed) spec.seed = *seed;

    bbe::EngineConfig cfg;
    if (const auto e = j.find("engine"); e != j.end()) cfg = bbe::engine_config_from_json(*e);
    bbe::sim::fill_default_economics(cfg, spec);

    bbe::sim::SimOptions opt;
    opt.policy = policy == "random" ? bbe::sim::Policy::UniformRandom : bbe::sim::Policy::Engine;
    opt.rounds = rounds;
    opt.objective = bbe::parse_objective(j.value("objective", std::string("clicks")));

    const bbe::sim::Population pop = bbe::sim::generate_population(spec);
    std::ofstream csv;
    if (!out_path.empty()) {
      csv.open(out_path);
      if (!csv) throw bbe::Error("cannot open " + out_path);
    }
    const bbe::sim::SimReport report = bbe::sim::run_simulation(pop, cfg, opt, out_path.empty() ? nullptr : &csv);
    std::cout << bbe::sim::report_to_json(report).dump(2) << '\n';
  } catch (const std::exception& ex) {
    std::cerr << "sim: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
