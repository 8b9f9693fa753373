#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "neos/report.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string scenario;
  std::string out_dir = "out";
  long long seed_override = -1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--scenario", opts.scenario, "scenario file (JSON)")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed-override", opts.seed_override,
                  "replace the scenario seed list with this single seed");
  cmd->add_flag("--quiet", opts.quiet, "suppress progress output");
}

neos::harness::ScenarioSpec load(const CommonOpts& opts) {
  auto spec = neos::harness::load_scenario(opts.scenario);
  if (opts.seed_override >= 0)
    spec.seeds = {static_cast<std::uint64_t>(opts.seed_override)};
  return spec;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw neos::RuntimeError("cannot write " + path.string());
  out << content;
}

void note(const CommonOpts& opts, const std::string& msg) {
  if (!opts.quiet) std::cout << msg << '\n';
}

int run_simulate(const CommonOpts& opts) {
  const auto spec = load(opts);
  const auto products = neos::fusion::simulate_group(spec, spec.seeds.front());
  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "measurements.csv",
             neos::report::measurements_csv(products.measurements));
  write_file(fs::path(opts.out_dir) / "truth.csv",
             neos::report::truth_csv(products.truth));
  note(opts, "wrote " + std::to_string(products.measurements.size()) +
                 " measurements to " + opts.out_dir);
  return 0;
}

int run_estimate(const CommonOpts& opts) {
  const auto spec = load(opts);
  const auto run = neos::fusion::run_group_scenario(spec, spec.seeds.front());

  std::map<std::string, neos::filter::TaskClassOutput> tasks;
  const auto env = spec.environment();
  for (std::size_t i = 0; i < run.node_ids.size(); ++i) {
    const auto& id = run.node_ids[i];
    const auto& est = run.estimates.at(id);
    const auto carrier = spec.carrier_initial_state(spec.carriers[i]);
    const neos::Vec3 carrier_pos =
        neos::scene::carrier_state_at(carrier, est.grid.back().t_s).position_m;
    tasks[id] =
        neos::filter::task_class_report(est, spec.catalog, carrier_pos, &env);
  }

  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "report.json",
             neos::report::run_report_json(spec, run, tasks));
  for (const auto& id : run.node_ids)
    write_file(fs::path(opts.out_dir) / ("estimates_" + id + ".csv"),
               neos::report::estimates_csv(run.estimates.at(id)));
  write_file(fs::path(opts.out_dir) / "events.jsonl",
             neos::report::event_log_jsonl(run.event_log));
  for (const auto& id : run.node_ids) {
    const auto& m = run.metrics.at(id);
    note(opts, "node " + id + ": range RMSE " + std::to_string(m.range_rmse_m) +
                   " m, class " + (m.class_correct ? "correct" : "wrong"));
  }
  return 0;
}

int run_sweep(const CommonOpts& opts) {
  const auto spec = load(opts);
  if (!spec.sweep)
    throw neos::ScenarioError("/sweep: scenario has no sweep block");
  const auto axis = neos::fusion::sweep_axis_from_string(spec.sweep->axis);
  const auto table = neos::fusion::degradation_sweep(spec, axis, spec.sweep->values);
  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "sweep.csv", neos::report::sweep_csv(table));
  note(opts, "wrote " + std::to_string(table.rows.size()) + " sweep rows");
  return 0;
}

int run_optimize(const CommonOpts& opts) {
  const auto spec = load(opts);
  if (!spec.optimize)
    throw neos::ScenarioError("/optimize: scenario has no optimize block");
  const auto report = neos::opt::optimize_architecture(spec);
  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "optimize.json",
             neos::report::optimization_report_json(report));
  note(opts, "best score " + std::to_string(report.best_score) + " after " +
                 std::to_string(report.evaluations) + " evaluations");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"network-centric staring-sensor simulation and estimation toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto* sim = app.add_subcommand("simulate", "synthesize measurement and truth tables");
  auto* est = app.add_subcommand("estimate", "run the joint classification/estimation pipeline");
  auto* swp = app.add_subcommand("sweep", "degradation sweep over a scenario axis");
  auto* opt = app.add_subcommand("optimize", "architecture search with differential evolution");
  for (auto* cmd : {sim, est, swp, opt}) add_common(cmd, opts);

  CLI11_PARSE(app, argc, argv);
  try {
    if (sim->parsed()) return run_simulate(opts);
    if (est->parsed()) return run_estimate(opts);
    if (swp->parsed()) return run_sweep(opts);
    if (opt->parsed()) return run_optimize(opts);
  } catch (const neos::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
