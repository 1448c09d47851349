// Command-line front end: pre-event scheduling, full simulation runs,
// stability reports and randomized self-checks.

#include <CLI11.hpp>

#include <complex>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "gridshift/allocation.hpp"
#include "gridshift/comm_graph.hpp"
#include "gridshift/control.hpp"
#include "gridshift/log.hpp"
#include "gridshift/oracle.hpp"
#include "gridshift/scenario.hpp"
#include "gridshift/simulate.hpp"

namespace {

constexpr std::uint64_t kDefaultSeed = 1729;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void emit(const std::string& path, const std::string& content) {
  if (path == "-")
    std::cout << content;
  else
    write_file(path, content);
}

int report_diagnostics(const std::vector<gridshift::Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << d.code << ": " << d.message << "\n";
  return 1;
}

gridshift::Scenario load_checked(const std::string& path, std::vector<gridshift::Diagnostic>& diags) {
  gridshift::Scenario sc = gridshift::load_scenario(path);
  diags = gridshift::validate(sc);
  return sc;
}

int cmd_schedule(const std::string& scenario_path, const std::string& out_path) {
  std::vector<gridshift::Diagnostic> diags;
  const gridshift::Scenario sc = load_checked(scenario_path, diags);
  if (!diags.empty()) return report_diagnostics(diags);

  std::vector<gridshift::RegionSpec> specs;
  for (const auto& region : sc.regions) {
    const gridshift::CommGraph graph = gridshift::build_chain_from_locations(region.locations);
    gridshift::RegionSpec spec = gridshift::make_region_spec(graph, region.locations, sc.channel);
    spec.p_max_mw = region.p_max_mw;
    spec.p_cst_mw = region.p_cst_mw;
    specs.push_back(std::move(spec));
  }
  const gridshift::AllocationPlan plan = gridshift::allocate(specs, sc.channel);
  emit(out_path, gridshift::plan_to_json(plan).dump(2) + "\n");
  gridshift::log::info("plan written to %s", out_path.c_str());
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_path,
                 const std::string& summary_path) {
  std::vector<gridshift::Diagnostic> diags;
  const gridshift::Scenario sc = load_checked(scenario_path, diags);
  if (!diags.empty()) return report_diagnostics(diags);

  const gridshift::TimeSeries ts = gridshift::run(sc);
  emit(out_path, gridshift::to_csv(ts));
  emit(summary_path, gridshift::summary_json(ts));
  gridshift::log::info("trajectory written to %s, summary to %s", out_path.c_str(),
                       summary_path.c_str());
  return 0;
}

int cmd_check_stability(const std::string& scenario_path) {
  std::vector<gridshift::Diagnostic> diags;
  const gridshift::Scenario sc = load_checked(scenario_path, diags);
  if (!diags.empty()) return report_diagnostics(diags);

  for (const auto& region : sc.regions) {
    const gridshift::CommGraph graph = gridshift::build_chain_from_locations(region.locations);
    const gridshift::ControllerGains gains{region.k_omega, region.k_p, region.k_u};
    const gridshift::GainCheck check = gridshift::check_gains(gains, graph);
    const gridshift::SpectralReport oracle = gridshift::spectral_radius_oracle(graph, region.k_p);

    std::printf("region %d: ", region.id);
    if (check.verdict == gridshift::GainVerdict::Stable) {
      std::printf("STABLE");
    } else {
      const gridshift::GainCondition* v = check.first_violation();
      std::printf("UNSTABLE (node %d: %s = %g)",
                  region.dgs[static_cast<std::size_t>(v->node)].id, v->expr.c_str(), v->value);
    }
    std::printf(" | oracle %s (spectral radius %.6f, subdominant %.6f)\n",
                oracle.classification == gridshift::ConsensusClass::ConsensusStable
                    ? "consensus-stable"
                    : oracle.classification == gridshift::ConsensusClass::Divergent ? "divergent"
                                                                                    : "marginal",
                oracle.spectral_radius, oracle.subdominant_modulus);
    std::printf("  eigenvalues:");
    for (const auto& ev : oracle.eigenvalues)
      std::printf(" %.6f%+.6fi (|.|=%.6f)", ev.real(), ev.imag(), std::abs(ev));
    std::printf("\n");
  }
  return 0;
}

int cmd_oracle(const std::string& scenario_path, int trials, std::uint64_t seed) {
  std::vector<gridshift::Diagnostic> diags;
  const gridshift::Scenario sc = load_checked(scenario_path, diags);
  if (!diags.empty()) return report_diagnostics(diags);

  const int sweep_trials = trials > 0 ? trials : 500;
  const int alloc_trials = trials > 0 ? trials : 100;

  const gridshift::SweepResult sweep = gridshift::gain_criteria_sweep(seed, sweep_trials);
  std::printf("gain-criteria sweep: %d/%d consensus-stable (seed %llu)\n", sweep.stable,
              sweep.trials, static_cast<unsigned long long>(seed));
  const gridshift::AllocComparison cmp =
      gridshift::allocation_comparison(seed + 1, alloc_trials, sc.channel);
  std::printf(
      "allocation vs brute force: %d instances, max gap %.4f%%, symmetric exact %d/%d, "
      "dominance %s\n",
      cmp.trials, 100.0 * cmp.max_gap, cmp.symmetric_equal, cmp.symmetric_instances,
      cmp.dominance_violations == 0 ? "ok" : "VIOLATED");
  return sweep.all_stable() && cmp.ok(0.05) ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridshift: pre-event wireless scheduling and delay-aware distributed "
               "secondary control of islanded microgrids"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string plan_out = "plan.json";
  std::string csv_out = "run.csv";
  std::string summary_out = "run.json";
  int trials = 0;
  std::uint64_t seed = kDefaultSeed;

  auto* schedule = app.add_subcommand("schedule", "solve the pre-event resource allocation");
  schedule->add_option("scenario", scenario_path, "scenario file")->required();
  schedule->add_option("--out", plan_out, "plan JSON path ('-' for stdout)");

  auto* simulate = app.add_subcommand("simulate", "run the full cyber-physical pipeline");
  simulate->add_option("scenario", scenario_path, "scenario file")->required();
  simulate->add_option("--out", csv_out, "trajectory CSV path ('-' for stdout)");
  simulate->add_option("--summary", summary_out, "summary JSON path ('-' for stdout)");

  auto* check = app.add_subcommand("check-stability", "closed-form criteria and eigenvalue oracle");
  check->add_option("scenario", scenario_path, "scenario file")->required();

  auto* oracle = app.add_subcommand("oracle", "randomized criteria sweep and allocation comparison");
  oracle->add_option("scenario", scenario_path, "scenario file (channel parameters)")->required();
  oracle->add_option("--trials", trials, "trial count for both sweeps");
  oracle->add_option("--seed", seed, "RNG seed (default 1729)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (schedule->parsed()) return cmd_schedule(scenario_path, plan_out);
    if (simulate->parsed()) return cmd_simulate(scenario_path, csv_out, summary_out);
    if (check->parsed()) return cmd_check_stability(scenario_path);
    if (oracle->parsed()) return cmd_oracle(scenario_path, trials, seed);
  } catch (const gridshift::ScenarioValidationError& e) {
    return report_diagnostics(e.diagnostics());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
