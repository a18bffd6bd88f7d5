#pragma once

// End-to-end experiments shared by the command line tool and the acceptance
// suite. Each returns plain data; formatting happens at the call site.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "twoscale/coarse_grain.hpp"
#include "twoscale/fp_oracle.hpp"
#include "twoscale/io.hpp"
#include "twoscale/macro_pde.hpp"
#include "twoscale/metrics.hpp"
#include "twoscale/micro_sim.hpp"
#include "twoscale/operators.hpp"
#include "twoscale/thermo.hpp"

namespace twoscale {

// ---- tables ------------------------------------------------------------------------

struct TableSpec {
  Potential potential;
  std::size_t k = 1;
  TableGrid grid;
  double conv_mesh = 1.0 / 64.0;

  std::string key() const {
    return "psi_k a=" + format_double(potential.a()) + " b=" + format_double(potential.b()) + " k=" + std::to_string(k) +
           " m_max=" + format_double(grid.m_max) + " h=" + format_double(grid.h) + " conv=" + format_double(conv_mesh);
  }
};

struct LoadedTable {
  PsiKTable table;
  std::string hash;  // git-style hash of the serialized table
  bool from_cache = false;
};

/// Builds psi_K, or reloads it from `cache_dir` when a table with the same key exists there.
inline LoadedTable load_or_build_psi_k(const TableSpec& spec, const std::string& cache_dir = "") {
  LoadedTable out;
  std::filesystem::path file;
  if (!cache_dir.empty()) {
    file = std::filesystem::path(cache_dir) / ("psi_k_" + git_blob_sha1(spec.key()).substr(0, 16) + ".json");
    if (std::filesystem::exists(file)) {
      const std::string text = read_text(file);
      out.table = psi_k_from_json(nlohmann::json::parse(text));
      out.hash = git_blob_sha1(text);
      out.from_cache = true;
      return out;
    }
  }
  out.table = build_psi_k(spec.potential, spec.k, spec.grid, spec.conv_mesh);
  const std::string text = to_json(out.table).dump() + "\n";
  out.hash = git_blob_sha1(text);
  if (!file.empty()) write_text(file, text);
  return out;
}

// ---- hydrodynamic runs -----------------------------------------------------------------

struct HydroRunParams {
  std::size_t n = 128, m = 16;
  Potential potential;
  double profile_mean = 0.0, amplitude = 0.5;
  std::size_t r = 200;
  double dt = 2e-5;
  double t_end = 0.1;
  Vector checkpoints;  // empty: 11 equally spaced times on [0, t_end]
  Integrator integrator = Integrator::exponential;
  InitialKind initial = InitialKind::conditional;
  McmcParams mcmc;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t m_pde = 256;
  double adv = -1.0;  // transport direction of the lattice dynamics
  TableGrid grid;
  double conv_mesh = 1.0 / 64.0;
  std::string cache_dir;
  double rho = 1.0;  // assumed LSI constant
};

struct HydroRunResult {
  std::size_t n = 0, m = 0, k = 0;
  Vector times;
  std::vector<Estimate> theta, gap, macro_gap, alpha;
  Estimate sup_gap, sup_theta;
  TheoremConstants constants;
  ErrorFunctional E;
  BoundReport bound;
  std::string table_hash;
  double max_mean_drift = 0.0;
  double macro_mean_drift = 0.0;
  bool macro_energy_ok = true;
  bool mcmc_ok = true;
  double mcmc_acceptance_min = 1.0, mcmc_acceptance_max = 1.0;
  double wall_seconds = 0.0;
};

/// Initial profile zeta0(theta) = mean + amplitude cos(2 pi theta).
inline FourierProfile cosine_profile(double mean, double amplitude) { return {mean, {std::complex<double>(amplitude, 0.0)}}; }

/// Reference solution of the limiting equation at the given times, as step
/// functions: exact cell averages on the lattice mesh in the Gaussian model,
/// the numerical PDE solution on m_pde cells otherwise.
inline std::vector<Vector> pde_reference(const FourierProfile& zeta0, const Vector& times, const Potential& psi,
                                         std::size_t n, std::size_t m_pde, double adv, const TableGrid& grid) {
  std::vector<Vector> ref;
  if (psi.is_gaussian()) {
    for (double t : times) ref.push_back(gaussian_exact_pde(zeta0, t, adv).cell_averages(n));
    return ref;
  }
  const CramerTable cramer_tab = build_cramer_table(psi, grid);
  const Flux flux{&cramer_tab};
  PdeOptions opt;
  opt.adv = adv;
  return solve_pde(zeta0.cell_averages(m_pde), times, flux, opt).profiles;
}

inline HydroRunResult run_hydro(const HydroRunParams& p) {
  const auto start = std::chrono::steady_clock::now();
  const BlockScheme scheme(p.n, p.m);
  const CoarseGraining cg(scheme);
  HydroRunResult res;
  res.n = p.n;
  res.m = p.m;
  res.k = scheme.block_size();

  const LoadedTable lt = load_or_build_psi_k({p.potential, res.k, p.grid, p.conv_mesh}, p.cache_dir);
  const PsiKTable& table = lt.table;
  res.table_hash = lt.hash;

  Vector times = p.checkpoints;
  if (times.empty())
    for (int i = 0; i <= 10; ++i) times.push_back(p.t_end * i / 10.0);
  res.times = times;

  const FourierProfile zeta0 = cosine_profile(p.profile_mean, p.amplitude);
  const Vector eta0 = zeta0.cell_averages(p.m);
  const MacroTrajectory macro = integrate_macro(cg, eta0, times, table);
  res.macro_mean_drift = macro.max_mean_drift;
  res.macro_energy_ok = macro.energy_bound_holds;
  const std::vector<Vector> ref = pde_reference(zeta0, times, p.potential, p.n, p.m_pde, p.adv, p.grid);

  SimConfig sc;
  sc.n = p.n;
  sc.m = p.m;
  sc.potential = p.potential;
  sc.dt = p.potential.is_gaussian() && p.integrator == Integrator::exponential
              ? std::max(p.dt, times.size() > 1 ? times[1] - times[0] : p.dt)
              : p.dt;
  sc.t_end = times.empty() ? 0.0 : times.back();
  sc.r = p.r;
  sc.seed = p.seed;
  sc.integrator = p.integrator;
  sc.checkpoints = times;
  sc.threads = p.threads;
  InitialData init;
  init.kind = p.initial;
  init.eta0 = eta0;
  init.table = &table;
  init.mcmc = p.mcmc;

  const Observer obs = [&](std::size_t c, std::span<const double> x) -> Vector {
    return {theta_sample(cg, x, macro.profiles[c]), hydro_gap_sample(x, ref[c]),
            macro_gap_sample(scheme, x, macro.profiles[c]), dot(x, x) / double(x.size())};
  };
  const EnsembleResult ens = run_ensemble(sc, init, obs);
  res.max_mean_drift = ens.max_mean_drift;
  res.mcmc_ok = ens.mcmc_ok;
  res.mcmc_acceptance_min = ens.min_mcmc_acceptance;
  res.mcmc_acceptance_max = ens.max_mcmc_acceptance;

  double alpha = 0.0;
  for (std::size_t c = 0; c < times.size(); ++c) {
    res.theta.push_back({ens.mean_of(c, 0), ens.stderr_of(c, 0)});
    res.gap.push_back({ens.mean_of(c, 1), ens.stderr_of(c, 1)});
    res.macro_gap.push_back({ens.mean_of(c, 2), ens.stderr_of(c, 2)});
    res.alpha.push_back({ens.mean_of(c, 3), ens.stderr_of(c, 3)});
    alpha = std::max(alpha, ens.mean_of(c, 3));
    if (c == 0 || res.gap[c].value > res.sup_gap.value) res.sup_gap = res.gap[c];
    if (c == 0 || res.theta[c].value > res.sup_theta.value) res.sup_theta = res.theta[c];
  }

  const ConvexityBounds cb = convexity_bounds(table);
  TheoremConstants k;
  k.c = 1.0;
  k.lambda = cb.lambda;
  k.Lambda = cb.Lambda;
  k.tau = cg.ops().spectral_gap();
  k.gamma = fluctuation_constant(cg);
  k.kappa = p.potential.sup_delta_d2();
  k.rho = p.rho;
  k.alpha = alpha;
  // Entropy of the local Gibbs state at eta0 per site, Gaussian form: a proxy
  // for C1, since the conditional initial law has no density with respect to mu.
  k.C1 = 0.5 * norm_Y_sq(macro_grad_H(eta0, table));
  k.T = times.empty() ? 0.0 : times.back();
  k.M = double(p.m);
  k.N = double(p.n);
  k.hbar0 = macro.hbar.empty() ? 0.0 : hbar_relative(eta0, table);
  k.delta_hbar = macro.hbar.empty() ? 0.0 : k.hbar0 - macro.hbar.back();
  res.constants = k;
  res.E = error_functional_E(k);
  res.bound = theorem1_bound_check(times, res.theta, res.macro_gap, k, res.E.total);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline nlohmann::json to_json(const HydroRunResult& r) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [name, v] : r.E.terms) terms[name] = v;
  return {{"N", r.n},
          {"M", r.m},
          {"K", r.k},
          {"sup_gap", r.sup_gap.value},
          {"sup_gap_stderr", r.sup_gap.stderr},
          {"sup_theta", r.sup_theta.value},
          {"sup_theta_stderr", r.sup_theta.stderr},
          {"bound", to_json(r.bound)},
          {"E", r.E.total},
          {"E_terms", terms},
          {"rho_hat", r.E.rho_hat},
          {"constants",
           {{"c", r.constants.c},
            {"lambda", r.constants.lambda},
            {"Lambda", r.constants.Lambda},
            {"tau", r.constants.tau},
            {"gamma", r.constants.gamma},
            {"kappa", r.constants.kappa},
            {"rho", r.constants.rho},
            {"rho_assumed", r.constants.rho_assumed},
            {"alpha", r.constants.alpha},
            {"C1", r.constants.C1},
            {"C1_assumed", r.constants.C1_assumed}}},
          {"table_hash", r.table_hash},
          {"max_mean_drift", r.max_mean_drift},
          {"macro_energy_ok", r.macro_energy_ok},
          {"mcmc_ok", r.mcmc_ok},
          {"wall_seconds", r.wall_seconds}};
}

// ---- OU exactness ------------------------------------------------------------------------

struct OuCheckpoint {
  double t = 0.0;
  double z_cos = 0.0, z_sin = 0.0;  // mode-1 projections of the mean
  double z_var = 0.0;               // (1/n) sum_i (x_i - m_i(t))^2 against (1/n) tr Sigma(t)
};

struct OuExactnessResult {
  std::vector<OuCheckpoint> transient;   // from a deterministic lifted profile
  std::vector<OuCheckpoint> stationary;  // from the invariant law
  double max_abs_z_transient = 0.0, max_abs_z_stationary = 0.0;
};

/// Compares ensemble statistics of the Gaussian model with ou_propagate.
inline OuExactnessResult run_ou_exactness(std::size_t n, std::size_t r, const Vector& times, std::uint64_t seed,
                                          std::size_t threads = 1, double dt = 1e-3) {
  const BlockScheme scheme(n, 8);
  const CirculantOps ops(scheme.dim());
  const Vector eta0 = cosine_profile(0.0, 0.5).cell_averages(8);
  const Vector m0 = lift_NPt(scheme, eta0);
  Vector cosv(n), sinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    cosv[i] = 2.0 / double(n) * std::cos(2.0 * std::numbers::pi * double(i) / double(n));
    sinv[i] = 2.0 / double(n) * std::sin(2.0 * std::numbers::pi * double(i) / double(n));
  }

  auto run = [&](bool stationary) {
    const Eigen::MatrixXd s0 = stationary ? mean_zero_projector(n) : Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    const Vector mstart = stationary ? Vector(n, 0.0) : m0;
    std::vector<OuMoments> exact;
    for (double t : times) exact.push_back(ou_propagate(ops, mstart, s0, t));
    SimConfig sc;
    sc.n = n;
    sc.m = 8;
    sc.dt = dt;
    sc.t_end = times.back();
    sc.r = r;
    sc.seed = seed + (stationary ? 1000003 : 0);
    sc.checkpoints = times;
    sc.threads = threads;
    InitialData init;
    init.eta0 = eta0;
    if (stationary) {
      init.custom = [n](std::mt19937_64& rng) {
        std::normal_distribution<double> normal;
        Vector z(n);
        for (double& v : z) v = normal(rng);
        return centered(z);
      };
    }
    const Observer obs = [&](std::size_t c, std::span<const double> x) -> Vector {
      const Vector d = subtract(x, exact[c].mean);
      return {dot(x, cosv), dot(x, sinv), dot(d, d) / double(n)};
    };
    const EnsembleResult ens = run_ensemble(sc, init, obs);
    std::vector<OuCheckpoint> out;
    for (std::size_t c = 0; c < times.size(); ++c) {
      OuCheckpoint cp;
      cp.t = times[c];
      auto z = [&](std::size_t j, double expect) {
        const double se = ens.stderr_of(c, j);
        return se > 0.0 ? (ens.mean_of(c, j) - expect) / se : (ens.mean_of(c, j) == expect ? 0.0 : 1e300);
      };
      cp.z_cos = z(0, dot(exact[c].mean, cosv));
      cp.z_sin = z(1, dot(exact[c].mean, sinv));
      cp.z_var = z(2, exact[c].cov.trace() / double(n));
      out.push_back(cp);
    }
    return out;
  };

  OuExactnessResult res;
  res.transient = run(false);
  res.stationary = run(true);
  for (const auto& c : res.transient)
    res.max_abs_z_transient = std::max({res.max_abs_z_transient, std::abs(c.z_cos), std::abs(c.z_sin), std::abs(c.z_var)});
  for (const auto& c : res.stationary)
    res.max_abs_z_stationary = std::max({res.max_abs_z_stationary, std::abs(c.z_cos), std::abs(c.z_sin), std::abs(c.z_var)});
  return res;
}

// ---- Gaussian entropy proxy ----------------------------------------------------------------

struct EntropyProxyResult {
  std::size_t n = 0, m = 0;
  Vector times, kl_per_site;
  double integral = 0.0;  // int_0^T (1/N) KL(f_t || G_t) dt
};

/// Gaussian model started from the local Gibbs state at eta0: the law stays
/// Gaussian with moments from ou_propagate, the local Gibbs state at eta(t)
/// is N(lift of eta(t), Pi), and their divergence is integrated in time.
inline EntropyProxyResult run_entropy_proxy(std::size_t n, std::size_t m, double t_end, std::size_t points = 11,
                                            double amplitude = 0.5) {
  const BlockScheme scheme(n, m);
  const CoarseGraining cg(scheme);
  const PsiKTable table = build_psi_k(Potential::gaussian(), scheme.block_size(), TableGrid{});
  const Vector eta0 = cosine_profile(0.0, amplitude).cell_averages(m);
  EntropyProxyResult res;
  res.n = n;
  res.m = m;
  for (std::size_t i = 0; i < points; ++i) res.times.push_back(t_end * double(i) / double(points - 1));
  const MacroTrajectory macro = integrate_macro(cg, eta0, res.times, table);

  auto gibbs_mean = [&](const Vector& eta) {
    Vector g = lift_NPt(scheme, macro_grad_H(eta, table));
    const double base = mean(eta);
    for (double& v : g) v += base;
    return g;
  };
  const Eigen::MatrixXd pi = mean_zero_projector(n);
  const Vector m0 = gibbs_mean(eta0);
  for (std::size_t i = 0; i < points; ++i) {
    const OuMoments mom = ou_propagate(cg.ops(), m0, pi, res.times[i]);
    const double kl = gaussian_relative_entropy(mom.mean, mom.cov, gibbs_mean(macro.profiles[i]), pi);
    res.kl_per_site.push_back(kl / double(n));
  }
  for (std::size_t i = 1; i < points; ++i)
    res.integral += 0.5 * (res.times[i] - res.times[i - 1]) * (res.kl_per_site[i] + res.kl_per_site[i - 1]);
  return res;
}

// ---- PDE convergence ----------------------------------------------------------------------------

struct PdeConvergenceResult {
  std::vector<std::size_t> meshes;
  Vector l2_errors;
  double order = 0.0;
  double max_mass_drift = 0.0;
};

/// L2 error of solve_pde against the exact solution of zeta_t = zeta_thth + adv zeta_th
/// from cos(2 pi theta), on each mesh.
inline PdeConvergenceResult run_pde_convergence(const std::vector<std::size_t>& meshes, double t_end, double adv = 1.0) {
  PdeConvergenceResult res;
  res.meshes = meshes;
  const FourierProfile z0 = cosine_profile(0.0, 1.0);
  const Vector times{t_end};
  Vector hs;
  for (std::size_t m : meshes) {
    PdeOptions opt;
    opt.adv = adv;
    const PdeGridSolution sol = solve_pde(z0.nodes(m), times, Flux{}, opt);
    const Vector exact = gaussian_exact_pde(z0, t_end, adv).nodes(m);
    const Vector d = subtract(sol.profiles.back(), exact);
    res.l2_errors.push_back(std::sqrt(dot(d, d) / double(m)));
    res.max_mass_drift = std::max(res.max_mass_drift, sol.max_mass_drift);
    hs.push_back(1.0 / double(m));
  }
  if (meshes.size() >= 2) res.order = fit_log_slope(hs, res.l2_errors);
  return res;
}

// ---- Fokker-Planck oracle suite ------------------------------------------------------------------

struct OracleSuiteResult {
  double stationarity_residual = 0.0;  // max |f_next - 1| from f = 1, over J scalings
  double identity_residual = 0.0;      // max |dS/dt + I_A|
  bool entropy_monotone = true;
  double mass_drift = 0.0;
  double fisher_j_independence = 0.0;  // |I_A(s=0) - I_A(s=1)| after one step from the same f0, relative
  double ou_theta_z = 0.0;             // ensemble Theta vs closed form, in MC standard errors
  std::size_t cells = 0;
  double dt = 0.0;
};

inline OracleSuiteResult run_oracle_suite(double h, double radius, std::size_t steps, std::uint64_t seed,
                                          std::size_t threads = 1) {
  OracleSuiteResult res;
  const Potential psi = Potential::gaussian();
  for (double s : {0.0, 0.5, 1.0}) {
    FpOptions opt;
    opt.h = h;
    opt.radius = radius;
    opt.j_scale = s;
    const FokkerPlanck3 fp(psi, opt);
    const Vector one(fp.cells_per_axis() * fp.cells_per_axis(), 1.0);
    const Vector next = fp.step(one, fp.dt_max());
    for (double v : next) res.stationarity_residual = std::max(res.stationarity_residual, std::abs(v - 1.0));
  }
  FpOptions opt;
  opt.h = h;
  opt.radius = radius;
  const FokkerPlanck3 fp(psi, opt);
  res.cells = fp.cells_per_axis();
  // f0: density of N((0.6, -0.3), 0.7 I) with respect to mu = N(0, I).
  const Vector f0 = fp.normalized(fp.sample([](double u, double v) {
    const double du = u - 0.6, dv = v + 0.3;
    return std::exp(-(du * du + dv * dv) / (2.0 * 0.7) + 0.5 * (u * u + v * v)) / 0.7;
  }));
  res.dt = fp.dt_max();
  const EntropySeries es = fp_entropy_series(fp, f0, res.dt, steps);
  res.identity_residual = es.max_identity_residual;
  res.entropy_monotone = es.monotone;
  Vector f = f0;
  for (std::size_t i = 0; i < 3; ++i) f = fp.step(f, res.dt);
  res.mass_drift = std::abs(fp.mass(f) - fp.mass(f0));

  FpOptions opt0 = opt;
  opt0.j_scale = 0.0;
  const FokkerPlanck3 fp0(psi, opt0);
  const double dt = std::min(fp.dt_max(), fp0.dt_max());
  const double i1 = fp.fisher_A(fp.step(f0, dt)), i0 = fp0.fisher_A(fp0.step(f0, dt));
  res.fisher_j_independence = std::abs(i1 - i0) / std::abs(i0);

  // Theta of a stationary ensemble around a flat profile against the trace formula.
  const std::size_t n = 32;
  const BlockScheme scheme(n, 4);
  const CoarseGraining cg(scheme);
  SimConfig sc;
  sc.n = n;
  sc.m = 4;
  sc.dt = 0.01;
  sc.t_end = 0.05;
  sc.r = 400;
  sc.seed = seed;
  sc.threads = threads;
  sc.checkpoints = {0.05};
  InitialData init;
  init.eta0 = Vector(4, 0.0);
  init.custom = [n](std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Vector z(n);
    for (double& v : z) v = normal(rng);
    return centered(z);
  };
  const Vector flat(4, 0.0);
  const EnsembleResult ens = run_ensemble(sc, init, [&](std::size_t, std::span<const double> x) -> Vector {
    return {theta_sample(cg, x, flat)};
  });
  const OuMoments mom = ou_propagate(cg.ops(), Vector(n, 0.0), mean_zero_projector(n), 0.05);
  const double exact = ou_theta_exact(cg.ops(), mom, Vector(n, 0.0));
  res.ou_theta_z = (ens.mean_of(0, 0) - exact) / ens.stderr_of(0, 0);
  return res;
}

// ---- assumption verification ----------------------------------------------------------------------

/// Per-mode ratio of (1/n)<A^{-1}x, x> to ||xbar||^2_{H^{-1}}; both forms are
/// shift invariant, so Fourier modes diagonalize them. Returns the smallest C
/// with (1/C) h <= q <= C h on the mean-zero subspace.
inline double norms_sandwich_constant(std::size_t n) {
  const CirculantOps ops{LatticeDim(n)};
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * std::numbers::pi * double(k * i) / double(n));
    const Vector xc = centered(x);
    const double q = ops.quad_form_Ainv(xc), h = h_minus1_sq(xc);
    lo = std::min(lo, q / h);
    hi = std::max(hi, q / h);
  }
  return std::max(hi, 1.0 / lo);
}

struct VerifyReport {
  nlohmann::json json;
  bool identities_pass = true;
};

inline VerifyReport run_verify(std::size_t n, std::size_t m, const Potential& psi, const TableGrid& grid,
                               double conv_mesh, const std::string& cache_dir = "") {
  VerifyReport rep;
  const AssumptionReport ar = check_assumptions(LatticeDim(n));
  const BlockScheme scheme(n, m);
  const CoarseGraining cg(scheme);

  // N P P^t = id on Y.
  double npp_err = 0.0;
  {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    Vector y(m);
    for (double& v : y) v = normal(rng);
    const Vector back = project_P(scheme, lift_NPt(scheme, y));
    for (std::size_t i = 0; i < m; ++i) npp_err = std::max(npp_err, std::abs(back[i] - y[i]));
  }
  // Closed form of P A^{-1} J N P^t against the composition through the lattice.
  double closed_err = 0.0;
  {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
      Vector xi(m);
      for (double& v : xi) v = normal(rng);
      xi = centered(xi);
      const Vector lifted = lift_NPt(scheme, xi);
      const Vector direct = project_P(scheme, cg.ops().solve_A_inv(cg.ops().apply_J(lifted)));
      const Vector closed = cg.apply_PAinvJNPt(xi);
      closed_err = std::max(closed_err, max_abs(subtract(direct, closed)) / std::max(1e-300, max_abs(direct)));
    }
  }
  const LoadedTable lt = load_or_build_psi_k({psi, scheme.block_size(), grid, conv_mesh}, cache_dir);
  const ConvexityBounds cb = convexity_bounds(lt.table);
  const double gamma = fluctuation_constant(cg);
  const double sandwich = norms_sandwich_constant(n);

  const bool npp_ok = npp_err == 0.0;
  const bool closed_ok = closed_err <= 1e-10;
  rep.identities_pass = ar.all_pass() && npp_ok && closed_ok;
  rep.json = {{"N", n},
              {"M", m},
              {"K", scheme.block_size()},
              {"identities",
               {{"J_antisymmetric", ar.j_antisymmetric},
                {"commutator_max", ar.commutator_max},
                {"commutator_tol", ar.commutator_tol},
                {"factorization_rel", ar.factorization_rel},
                {"weak_asymmetry_max_ratio", ar.weak_asym_max_ratio},
                {"weak_asymmetry_violations", ar.weak_asym_violations},
                {"NPPt_max_error", npp_err},
                {"closed_form_rel_error", closed_err},
                {"pass", rep.identities_pass}}},
              {"constants",
               {{"c", 1.0},
                {"c_margin", 1.0 - ar.weak_asym_max_ratio},
                {"tau", ar.spectral_gap},
                {"tau_limit", ar.spectral_gap_limit},
                {"gamma", gamma},
                {"lambda", cb.lambda},
                {"Lambda", cb.Lambda},
                {"convex", cb.convex()},
                {"kappa", psi.sup_delta_d2()},
                {"norms_sandwich_C", sandwich}}},
              {"table_hash", lt.hash}};
  return rep;
}

}  // namespace twoscale
