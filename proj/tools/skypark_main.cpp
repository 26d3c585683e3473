#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "skypark/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace skypark;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open spec file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot write output file: " + path.string());
  out << content;
}

struct CommonArgs {
  std::string spec_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool timings = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out = true) {
  cmd->add_option("--spec", args.spec_path, "scenario JSON file")->required();
  if (needs_out) cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override the scenario master seed");
  cmd->add_option("--threads", args.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--timings", args.timings, "include wall-clock timings in reports");
}

RunOptions options_of(const CommonArgs& args) {
  RunOptions opts;
  opts.threads = args.threads;
  opts.timings = args.timings;
  opts.seed_override = args.seed;
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skypark: drone light show failure evacuation and recovery simulator"};
  app.require_subcommand(1);

  CommonArgs plan_args, sim_args, base_args, eval_args, occ_args;
  std::string baseline_strategy = "hover";
  int eval_count = 200;
  std::uint64_t eval_seed = 1;

  CLI::App* plan_cmd = app.add_subcommand("plan", "compute evacuation plans and a report");
  add_common(plan_cmd, plan_args);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "run the full incident pipeline");
  add_common(sim_cmd, sim_args);

  CLI::App* base_cmd = app.add_subcommand("baseline", "run a baseline evacuation strategy");
  add_common(base_cmd, base_args);
  base_cmd->add_option("--strategy", baseline_strategy, "hover | straight_to_park | ignore")
      ->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "paired batch evaluation against baselines");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--count", eval_count, "number of scenarios")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--batch-seed", eval_seed, "seed for the scenario batch");

  CLI::App* occ_cmd = app.add_subcommand("export-occupancy", "write the combined tile table");
  add_common(occ_cmd, occ_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan_cmd->parsed()) {
      const auto spec = ScenarioSpec::from_json_text(read_file(plan_args.spec_path));
      const auto art = run_incident(spec, options_of(plan_args));
      write_file(fs::path(plan_args.out_dir) / "report.json", art.report.to_json_text());
      std::ostringstream plans;
      write_plans(plans, art.formation, art.zones.t0);
      write_file(fs::path(plan_args.out_dir) / "plans.txt", plans.str());
      std::cout << "wrote report.json and plans.txt to " << plan_args.out_dir << "\n";
    } else if (sim_cmd->parsed()) {
      const auto spec = ScenarioSpec::from_json_text(read_file(sim_args.spec_path));
      const auto art = run_incident(spec, options_of(sim_args));
      write_file(fs::path(sim_args.out_dir) / "report.json", art.report.to_json_text());
      std::cout << "wrote report.json to " << sim_args.out_dir << "\n";
    } else if (base_cmd->parsed()) {
      const auto spec = ScenarioSpec::from_json_text(read_file(base_args.spec_path));
      const Strategy strategy = strategy_from_string(baseline_strategy);
      const auto art = run_baseline(spec, strategy, options_of(base_args));
      write_file(fs::path(base_args.out_dir) / "report.json", art.report.to_json_text());
      std::cout << "wrote report.json to " << base_args.out_dir << "\n";
    } else if (eval_cmd->parsed()) {
      const auto spec = ScenarioSpec::from_json_text(read_file(eval_args.spec_path));
      std::uint64_t seed = eval_args.seed.value_or(eval_seed);
      const auto result = evaluate_batch(spec, eval_count, seed, eval_args.threads);
      write_file(fs::path(eval_args.out_dir) / "batch.csv", result.to_csv());
      write_file(fs::path(eval_args.out_dir) / "summary.json", result.summary_json());
      std::cout << "wrote batch.csv and summary.json to " << eval_args.out_dir << "\n";
    } else if (occ_cmd->parsed()) {
      const auto spec = ScenarioSpec::from_json_text(read_file(occ_args.spec_path));
      const auto art = run_incident(spec, options_of(occ_args));
      std::ostringstream table;
      write_occupancy_table(table, art.combined);
      write_file(fs::path(occ_args.out_dir) / "occupancy.csv", table.str());
      std::cout << "wrote occupancy.csv to " << occ_args.out_dir << "\n";
    }
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
