// twoscale: command line front end.
//
//   twoscale verify|simulate|macro|pde|sweep|oracle [--config PATH] [--seed U64]
//            [--out DIR] [--threads INT] [--deterministic BOOL]
//
// Every run writes results.csv, verdicts.json and manifest.json into --out.
// Exit codes: 0 success, 1 identity failure, 2 config error, 3 numerical abort.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "twoscale/config.hpp"
#include "twoscale/experiments.hpp"
#include "twoscale/io.hpp"

namespace ts = twoscale;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kIdentityFailure = 1, kConfigError = 2, kNumericalAbort = 3;

struct Outputs {
  fs::path dir;
  json manifest;
  json verdicts = json::object();

  void write_results(const ts::CsvTable& table) {
    const std::string text = table.str();
    ts::write_text(dir / "results.csv", text);
    manifest["outputs"]["results.csv"] = ts::git_blob_sha1(text);
  }

  void finish() {
    const std::string v = verdicts.dump(2) + "\n";
    ts::write_text(dir / "verdicts.json", v);
    manifest["outputs"]["verdicts.json"] = ts::git_blob_sha1(v);
    ts::write_json(dir / "manifest.json", manifest);
  }
};

Outputs open_outputs(const ts::ExperimentConfig& cfg) {
  Outputs o;
  o.dir = cfg.out;
  fs::create_directories(o.dir);
  const json resolved = cfg.to_json();
  o.manifest = {{"tool", "twoscale"},
                {"mode", cfg.mode},
                {"config", resolved},
                {"config_hash", ts::git_blob_sha1(resolved.dump())},
                {"seed", cfg.seed},
                {"build", {{"compiler", __VERSION__}, {"cplusplus", __cplusplus}}},
                {"tables", json::object()},
                {"outputs", json::object()}};
  return o;
}

ts::HydroRunParams hydro_params(const ts::ExperimentConfig& cfg, std::size_t n, std::size_t m) {
  ts::HydroRunParams p;
  p.n = n;
  p.m = m;
  p.potential = cfg.potential();
  p.profile_mean = cfg.profile_mean;
  p.amplitude = cfg.amplitude;
  p.r = cfg.r;
  p.dt = cfg.dt;
  p.t_end = cfg.t_end;
  p.checkpoints = cfg.checkpoint_times();
  p.integrator = cfg.integrator_kind();
  p.initial = cfg.initial_kind();
  p.mcmc.tune_sweeps = cfg.tune_sweeps;
  p.mcmc.burn_in_sweeps = cfg.burn_in;
  p.seed = cfg.seed;
  p.threads = cfg.threads;
  p.m_pde = cfg.m_pde;
  p.adv = cfg.adv;
  p.grid = cfg.table_grid();
  p.conv_mesh = cfg.conv_mesh;
  p.cache_dir = cfg.cache_dir;
  return p;
}

int cmd_verify(const ts::ExperimentConfig& cfg) {
  Outputs out = open_outputs(cfg);
  bool pass = true;
  ts::CsvTable csv({"N", "check", "value", "tolerance", "pass"});
  for (std::size_t n = 3; n <= 64; ++n) {
    const ts::AssumptionReport r = ts::check_assumptions(ts::LatticeDim(n));
    pass = pass && r.all_pass();
    csv.add(ts::CsvTable::Row() << n << "commutator_max" << r.commutator_max << r.commutator_tol << r.commutes());
    csv.add(ts::CsvTable::Row() << n << "factorization_rel" << r.factorization_rel << 1e-12 << r.factorizes());
    csv.add(ts::CsvTable::Row() << n << "weak_asymmetry_violations" << double(r.weak_asym_violations) << 0.0
                                << r.weakly_asymmetric());
    csv.add(ts::CsvTable::Row() << n << "J_antisymmetric" << double(r.j_antisymmetric) << 1.0 << r.j_antisymmetric);
  }
  const ts::VerifyReport rep = ts::run_verify(cfg.verify_n, cfg.verify_m, cfg.potential(), cfg.table_grid(),
                                              cfg.conv_mesh, cfg.cache_dir);
  pass = pass && rep.identities_pass;
  out.write_results(csv);
  out.manifest["tables"]["psi_k"] = rep.json["table_hash"];
  out.verdicts = {{"identities_pass", pass}, {"report", rep.json}};
  ts::write_json(out.dir / "report.json", rep.json);
  out.finish();
  std::cout << rep.json.dump(2) << "\n" << (pass ? "verify: all identities pass" : "verify: IDENTITY FAILURE") << "\n";
  return pass ? kOk : kIdentityFailure;
}

void add_hydro_row(ts::CsvTable& csv, const ts::HydroRunResult& r, bool deterministic) {
  ts::CsvTable::Row row;
  row << r.n << r.m << r.k << r.sup_gap.value << r.sup_gap.stderr << r.sup_theta.value << r.sup_theta.stderr
      << r.bound.lhs << r.bound.rhs << r.bound.margin << r.E.total;
  if (deterministic) row << "NA";
  else row << r.wall_seconds;
  csv.add(row);
}

int cmd_simulate(const ts::ExperimentConfig& cfg) {
  Outputs out = open_outputs(cfg);
  const auto [n, m] = cfg.schedule.front();
  const ts::HydroRunResult r = ts::run_hydro(hydro_params(cfg, n, m));
  ts::CsvTable csv({"time", "theta", "theta_se", "hydro_gap", "hydro_gap_se", "macro_gap", "macro_gap_se", "alpha",
                    "alpha_se"});
  for (std::size_t c = 0; c < r.times.size(); ++c)
    csv.add(ts::CsvTable::Row() << r.times[c] << r.theta[c].value << r.theta[c].stderr << r.gap[c].value
                                << r.gap[c].stderr << r.macro_gap[c].value << r.macro_gap[c].stderr
                                << r.alpha[c].value << r.alpha[c].stderr);
  out.write_results(csv);
  out.manifest["tables"]["psi_k"] = r.table_hash;
  json summary = ts::to_json(r);
  if (cfg.deterministic) summary.erase("wall_seconds");
  out.verdicts = {{"theorem_bound", ts::to_json(r.bound)},
                  {"theorem_bound_holds", r.bound.holds},
                  {"mean_conserved", r.max_mean_drift <= 1e-8},
                  {"mcmc_ok", r.mcmc_ok},
                  {"summary", summary}};
  out.finish();
  std::cout << "simulate N=" << n << " M=" << m << ": sup gap " << r.sup_gap.value << " +- " << r.sup_gap.stderr
            << ", bound margin " << r.bound.margin << "\n";
  return kOk;
}

int cmd_macro(const ts::ExperimentConfig& cfg) {
  Outputs out = open_outputs(cfg);
  const auto [n, m] = cfg.schedule.front();
  const ts::BlockScheme scheme(n, m);
  const ts::CoarseGraining cg(scheme);
  const ts::LoadedTable lt =
      ts::load_or_build_psi_k({cfg.potential(), scheme.block_size(), cfg.table_grid(), cfg.conv_mesh}, cfg.cache_dir);
  const ts::Vector eta0 = ts::cosine_profile(cfg.profile_mean, cfg.amplitude).cell_averages(m);
  const ts::Vector times = cfg.checkpoint_times();
  const ts::MacroTrajectory tr = ts::integrate_macro(cg, eta0, times, lt.table);
  ts::CsvTable csv({"time", "block", "eta", "hbar_rel"});
  for (std::size_t c = 0; c < tr.times.size(); ++c)
    for (std::size_t b = 0; b < m; ++b)
      csv.add(ts::CsvTable::Row() << tr.times[c] << b << tr.profiles[c][b] << tr.hbar[c]);
  out.write_results(csv);
  out.manifest["tables"]["psi_k"] = lt.hash;
  out.verdicts = {{"mean_conserved", tr.max_mean_drift <= 1e-10},
                  {"max_mean_drift", tr.max_mean_drift},
                  {"energy_bound_holds", tr.energy_bound_holds},
                  {"accepted_steps", tr.accepted},
                  {"rejected_steps", tr.rejected}};
  out.finish();
  std::cout << "macro N=" << n << " M=" << m << ": " << tr.accepted << " steps, mean drift " << tr.max_mean_drift << "\n";
  return kOk;
}

int cmd_pde(const ts::ExperimentConfig& cfg) {
  Outputs out = open_outputs(cfg);
  const ts::Potential psi = cfg.potential();
  std::optional<ts::CramerTable> tab;
  if (!psi.is_gaussian()) tab = ts::build_cramer_table(psi, cfg.table_grid());
  const ts::Flux flux{tab ? &*tab : nullptr};
  const ts::FourierProfile z0 = ts::cosine_profile(cfg.profile_mean, cfg.amplitude);
  const ts::Vector times = cfg.checkpoint_times();
  ts::PdeOptions opt;
  opt.adv = cfg.adv;
  const ts::PdeGridSolution sol = ts::solve_pde(z0.nodes(cfg.m_pde), times, flux, opt);
  ts::CsvTable csv({"time", "node", "theta", "zeta"});
  for (std::size_t c = 0; c < sol.times.size(); ++c)
    for (std::size_t j = 0; j < sol.m; ++j)
      csv.add(ts::CsvTable::Row() << sol.times[c] << j << (double(j) + 0.5) / double(sol.m) << sol.profiles[c][j]);
  out.write_results(csv);
  if (tab) out.manifest["tables"]["cramer"] = ts::git_blob_sha1(ts::to_json(*tab).dump() + "\n");
  out.verdicts = {{"mass_conserved", sol.max_mass_drift <= 1e-13}, {"max_mass_drift", sol.max_mass_drift}, {"dt", sol.dt}};
  if (psi.is_gaussian()) {
    const ts::Vector exact = ts::gaussian_exact_pde(z0, times.back(), cfg.adv).nodes(sol.m);
    const ts::Vector d = ts::subtract(sol.profiles.back(), exact);
    out.verdicts["l2_error_vs_exact"] = std::sqrt(ts::dot(d, d) / double(sol.m));
  }
  out.finish();
  std::cout << "pde m=" << sol.m << " dt=" << sol.dt << ": mass drift " << sol.max_mass_drift << "\n";
  return kOk;
}

int cmd_sweep(const ts::ExperimentConfig& cfg) {
  Outputs out = open_outputs(cfg);
  ts::CsvTable csv({"N", "M", "K", "sup_hydro_gap", "sup_hydro_gap_se", "sup_theta", "sup_theta_se", "bound_lhs",
                    "bound_rhs", "bound_margin", "E", "wall_seconds"});
  std::vector<ts::HydroRunResult> runs;
  json points = json::array();
  for (const auto& [n, m] : cfg.schedule) {
    runs.push_back(ts::run_hydro(hydro_params(cfg, n, m)));
    add_hydro_row(csv, runs.back(), cfg.deterministic);
    json j = ts::to_json(runs.back());
    if (cfg.deterministic) j.erase("wall_seconds");
    points.push_back(j);
    out.manifest["tables"]["psi_k K=" + std::to_string(n / m)] = runs.back().table_hash;
    // Flush after every point so a later abort keeps the finished rows.
    out.write_results(csv);
    std::cout << "sweep N=" << n << " M=" << m << ": sup gap " << runs.back().sup_gap.value << " +- "
              << runs.back().sup_gap.stderr << "\n";
  }
  bool monotone = true, bounds = true;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const double diff = runs[i - 1].sup_gap.value - runs[i].sup_gap.value;
    const double se = std::hypot(runs[i - 1].sup_gap.stderr, runs[i].sup_gap.stderr);
    if (!(diff > 2.0 * se)) monotone = false;
  }
  for (const auto& r : runs) bounds = bounds && r.bound.holds;
  out.verdicts = {{"gap_decreasing_beyond_2se", monotone}, {"theorem_bound_holds_all", bounds}, {"points", points}};
  out.finish();
  std::cout << "sweep: gap decreasing " << (monotone ? "yes" : "NO") << ", bound holds " << (bounds ? "yes" : "NO") << "\n";
  return kOk;
}

int cmd_oracle(const ts::ExperimentConfig& cfg) {
  Outputs out = open_outputs(cfg);
  const ts::OracleSuiteResult r =
      ts::run_oracle_suite(cfg.oracle_h, cfg.oracle_radius, cfg.oracle_steps, cfg.seed, cfg.threads);
  ts::CsvTable csv({"invariant", "residual", "tolerance", "pass"});
  auto add = [&](const char* name, double v, double tol) {
    csv.add(ts::CsvTable::Row() << name << v << tol << (v <= tol));
    out.verdicts[name] = {{"residual", v}, {"tolerance", tol}, {"pass", v <= tol}};
  };
  add("stationarity", r.stationarity_residual, 1e-8);
  add("entropy_identity", r.identity_residual, 1e-4);
  add("mass_conservation", r.mass_drift, 1e-12);
  add("ou_theta_z", std::abs(r.ou_theta_z), 3.0);
  csv.add(ts::CsvTable::Row() << "entropy_monotone" << (r.entropy_monotone ? 0.0 : 1.0) << 0.0 << r.entropy_monotone);
  out.verdicts["entropy_monotone"] = r.entropy_monotone;
  out.verdicts["fisher_j_independence_rel"] = r.fisher_j_independence;
  out.write_results(csv);
  out.finish();
  std::cout << csv.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twoscale: hydrodynamic-limit experiments for weakly asymmetric Kawasaki-type lattice dynamics"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<bool> deterministic;

  const char* modes[][2] = {{"verify", "check operator identities, assumptions and convexity bounds"},
                            {"simulate", "one ensemble run at the first schedule point"},
                            {"macro", "integrate the coarse-grained ODE"},
                            {"pde", "solve the limiting PDE"},
                            {"sweep", "convergence sweep over the (N, M) schedule"},
                            {"oracle", "n = 3 Fokker-Planck and OU oracle suite"}};
  for (const auto& mode : modes) {
    CLI::App* sub = app.add_subcommand(mode[0], mode[1]);
    sub->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "64-bit seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--deterministic", deterministic, "bit-reproducible outputs (omit wall times)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  ts::ExperimentConfig cfg;
  try {
    cfg.mode = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      ts::apply_ini(in, cfg, config_path);
    }
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (deterministic) cfg.deterministic = *deterministic;
    if (!out_dir.empty()) cfg.out = out_dir;
    cfg.validate();
  } catch (const ts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (cfg.mode == "verify") return cmd_verify(cfg);
    if (cfg.mode == "simulate") return cmd_simulate(cfg);
    if (cfg.mode == "macro") return cmd_macro(cfg);
    if (cfg.mode == "pde") return cmd_pde(cfg);
    if (cfg.mode == "sweep") return cmd_sweep(cfg);
    if (cfg.mode == "oracle") return cmd_oracle(cfg);
  } catch (const ts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kNumericalAbort;
  }
  return kConfigError;
}
