#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "crowdcontest/crowdcontest.hpp"

namespace fs = std::filesystem;
using namespace crowdcontest;

namespace {

constexpr int exit_config = 2;
constexpr int exit_solver = 3;

int run_command(const std::string& spec_path, const std::string& preset_name, const std::string& out_dir,
                unsigned threads) {
  experiment::ExperimentSpec spec;
  try {
    if (!preset_name.empty()) {
      spec = experiment::parse_spec(experiment::preset(preset_name));
    } else {
      std::ifstream in(spec_path);
      if (!in) throw config_error("<spec>", "cannot open '" + spec_path + "'");
      std::ostringstream text;
      text << in.rdbuf();
      spec = experiment::parse_spec_text(text.str(), fs::path(spec_path).parent_path());
    }
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  }
  if (threads) spec.threads = threads;

  experiment::RunResult result;
  try {
    experiment::run_experiment(spec, result);
  } catch (const contest_error& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    try {
      experiment::write_tables(spec, result, out_dir, std::string(e.what()));
    } catch (const io_error& io) {
      std::cerr << "io error: " << io.what() << '\n';
    }
    return exit_solver;
  }
  try {
    for (const auto& p : experiment::write_tables(spec, result, out_dir)) std::cout << p.string() << '\n';
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return exit_solver;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourcing contest experiments"};
  app.require_subcommand(1);

  std::string spec_path, preset_name, out_dir = "results";
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "Run an experiment spec and write CSV tables");
  run->add_option("spec", spec_path, "JSON experiment spec");
  run->add_option("--preset", preset_name, "Run a built-in preset instead of a spec file");
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--threads", threads, "Worker threads (default: CROWDCONTEST_THREADS or hardware)");

  std::string trace_preset, trace_out;
  std::uint64_t trace_seed = 0;
  auto* gen = app.add_subcommand("trace-gen", "Write a synthetic join trace");
  gen->add_option("preset", trace_preset, "uniform20 | bimodal | campus")->required();
  gen->add_option("seed", trace_seed, "RNG seed")->required();
  gen->add_option("out", trace_out, "Output file")->required();

  auto* list = app.add_subcommand("preset-list", "List built-in experiment presets");
  std::string show_name;
  auto* show = app.add_subcommand("preset-show", "Print a preset spec as JSON");
  show->add_option("name", show_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  if (run->parsed()) {
    if (spec_path.empty() == preset_name.empty()) {
      std::cerr << "config error: give either a spec file or --preset\n";
      return exit_config;
    }
    return run_command(spec_path, preset_name, out_dir, threads);
  }
  if (gen->parsed()) {
    std::string text;
    try {
      text = experiment::generate_trace(trace_preset, trace_seed);
    } catch (const config_error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return exit_config;
    }
    std::ofstream f(trace_out, std::ios::binary);
    if (!(f << text)) {
      std::cerr << "io error: cannot write '" << trace_out << "'\n";
      return exit_solver;
    }
    return 0;
  }
  if (list->parsed()) {
    for (const auto& [name, spec] : experiment::presets()) std::cout << name << '\n';
    return 0;
  }
  if (show->parsed()) {
    try {
      std::cout << experiment::preset(show_name).dump(2) << '\n';
    } catch (const config_error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return exit_config;
    }
  }
  return 0;
}
