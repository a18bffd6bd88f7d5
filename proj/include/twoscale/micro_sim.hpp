#pragma once

// Microscopic dynamics
//   dX = -(A + J) grad H(X) dt + sqrt(2A) dW,   grad H(x)_i = psi'(x_i),
// its integrators, the samplers used for initial data, and a threaded
// ensemble driver with per-checkpoint observables.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "twoscale/coarse_grain.hpp"
#include "twoscale/errors.hpp"
#include "twoscale/operators.hpp"
#include "twoscale/thermo.hpp"
#include "twoscale/vector_ops.hpp"

namespace twoscale {

enum class Integrator { exponential, semi_implicit, explicit_euler };

inline std::string to_string(Integrator i) {
  switch (i) {
    case Integrator::exponential: return "exponential";
    case Integrator::semi_implicit: return "semi-implicit";
    case Integrator::explicit_euler: return "explicit";
  }
  return "?";
}

inline Integrator parse_integrator(const std::string& s) {
  if (s == "exponential") return Integrator::exponential;
  if (s == "semi-implicit" || s == "semi_implicit") return Integrator::semi_implicit;
  if (s == "explicit") return Integrator::explicit_euler;
  throw ConfigError("unknown integrator '" + s + "' (expected exponential, semi-implicit or explicit)");
}

/// Independent stream for trajectory `index` of a run seeded with `seed`.
/// The pair is mixed through splitmix64, so streams do not depend on the
/// order or thread in which trajectories are run.
inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  const std::uint64_t a = mix(seed), b = mix(a ^ mix(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{std::uint32_t(a), std::uint32_t(a >> 32), std::uint32_t(b), std::uint32_t(b >> 32)};
  return std::mt19937_64(seq);
}

/// -(A + J) grad H(x).
inline Vector drift(const CirculantOps& ops, const Potential& psi, std::span<const double> x) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = psi.d1(x[i]);
  const Vector ag = ops.apply_A(g), jg = ops.apply_J(g);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -(ag[i] + jg[i]);
  return g;
}

/// sqrt(2) n (b_{i+1} - b_i) with b_i ~ N(0, dt) iid; covariance 2 A dt.
template <class Rng>
Vector noise_step(std::size_t n, double dt, Rng& rng) {
  if (dt < 0.0) throw DomainError("noise_step: negative dt");
  Vector b(n), out(n);
  if (dt == 0.0) return Vector(n, 0.0);
  std::normal_distribution<double> normal(0.0, std::sqrt(dt));
  for (double& v : b) v = normal(rng);
  const double s = std::sqrt(2.0) * double(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = s * (b[i + 1 == n ? 0 : i + 1] - b[i]);
  return out;
}

/// Largest dt the explicit scheme accepts: 1 / (8 n^2 max psi'').
inline double explicit_stability_bound(std::size_t n, const Potential& psi) {
  return 1.0 / (8.0 * double(n) * double(n) * psi.max_d2());
}

/// One-step map for a fixed dt. Coefficients are precomputed; the object is
/// immutable and shared between threads.
///
/// exponential:   every Fourier mode k of the linear part is propagated
///   exactly, X_k <- e^{-l_k dt} X_k - (1 - e^{-l_k dt}) G_k
///                   + sqrt(1 - e^{-2 a_k dt}) Z_k,
///   with l_k the eigenvalue of A + J, a_k = Re l_k, G the transform of the
///   bounded residual psi'(x) - x and Z the transform of white noise. Exact in
///   law for the Gaussian model at any dt.
/// semi-implicit: (I + dt(A+J)) x_new = x - dt (A+J)(psi'(x) - x) + noise.
/// explicit:      Euler-Maruyama, subject to explicit_stability_bound.
class MicroStepper {
 public:
  MicroStepper(const CirculantOps& ops, const Potential& psi, double dt, Integrator integrator)
      : ops_(&ops), psi_(psi), dt_(dt), integrator_(integrator) {
    const std::size_t n = ops.size();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("MicroStepper: dt must be positive");
    if (integrator == Integrator::explicit_euler && dt > explicit_stability_bound(n, psi) * (1.0 + 1e-12)) {
      throw DomainError("MicroStepper: dt = " + std::to_string(dt) + " exceeds the explicit stability bound " +
                        std::to_string(explicit_stability_bound(n, psi)));
    }
    const std::size_t bins = n / 2 + 1;
    lin_.resize(bins);
    force_.resize(bins);
    noise_.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const std::complex<double> l = generator_eigenvalue(n, k);
      if (integrator == Integrator::exponential) {
        const std::complex<double> e = std::exp(-l * dt);
        lin_[k] = e;
        force_[k] = 1.0 - e;
        noise_[k] = k == 0 ? 0.0 : std::sqrt(-std::expm1(-2.0 * l.real() * dt));
      } else if (integrator == Integrator::semi_implicit) {
        lin_[k] = 1.0 / (1.0 + dt * l);
        force_[k] = dt * l * lin_[k];
      }
    }
  }

  double dt() const { return dt_; }
  Integrator integrator() const { return integrator_; }

  /// Advances x in place by one step.
  template <class Rng>
  void step(Vector& x, Rng& rng) const {
    const std::size_t n = x.size();
    require_dim(n, ops_->size(), "MicroStepper::step");
    switch (integrator_) {
      case Integrator::explicit_euler: {
        const Vector d = drift(*ops_, psi_, x);
        const Vector w = noise_step(n, dt_, rng);
        for (std::size_t i = 0; i < n; ++i) x[i] += dt_ * d[i] + w[i];
        return;
      }
      case Integrator::semi_implicit: {
        const Vector w = noise_step(n, dt_, rng);
        Vector rhs(x);
        for (std::size_t i = 0; i < n; ++i) rhs[i] += w[i];
        spectral_update(rhs, x, nullptr);
        return;
      }
      case Integrator::exponential: {
        std::normal_distribution<double> normal;
        Vector z(n);
        for (double& v : z) v = normal(rng);
        const Vector xin(x);
        spectral_update(xin, x, &z);
        return;
      }
    }
  }

 private:
  // out = lin * base - force * residual (+ noise * z), mode by mode.
  void spectral_update(std::span<const double> base, Vector& out, const Vector* z) const {
    const RealFft& fft = ops_->fft();
    const std::size_t n = out.size(), bins = fft.bins();
    std::vector<std::complex<double>> xb(bins), gb, zb;
    fft.forward(base, xb);
    const bool nonlinear = !psi_.is_gaussian();
    if (nonlinear) {
      Vector g(n);
      // The residual is evaluated at the pre-step state, which equals `out` on entry.
      for (std::size_t i = 0; i < n; ++i) g[i] = psi_.perturbation_d1(out[i]);
      gb.resize(bins);
      fft.forward(g, gb);
    }
    if (z != nullptr) {
      zb.resize(bins);
      fft.forward(*z, zb);
    }
    const double inv_n = 1.0 / double(n);
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> v = lin_[k] * xb[k];
      if (nonlinear) v -= force_[k] * gb[k];
      if (z != nullptr) v += noise_[k] * zb[k];
      xb[k] = v * inv_n;
    }
    fft.inverse(xb, out);
  }

  const CirculantOps* ops_;
  Potential psi_;
  double dt_;
  Integrator integrator_;
  std::vector<std::complex<double>> lin_, force_;
  std::vector<double> noise_;
};

// ---- samplers --------------------------------------------------------------

/// Draws from the single-site law proportional to exp(s x - psi(x)) by
/// rejection from N(s, 1); the acceptance ratio exp(-a cos(bx) - |a|) is at
/// least exp(-2|a|).
template <class Rng>
double sample_tilted_site(const Potential& psi, double s, Rng& rng) {
  std::normal_distribution<double> normal(s, 1.0);
  if (psi.is_gaussian()) return normal(rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int tries = 0; tries < 100000; ++tries) {
    const double x = normal(rng);
    const double log_acc = -psi.a() * std::cos(psi.b() * x) - std::abs(psi.a());
    if (std::log(unif(rng)) < log_acc) return x;
  }
  throw NumericalError("sample_tilted_site: rejection sampler stalled");
}

struct McmcParams {
  std::size_t tune_sweeps = 50;
  std::size_t burn_in_sweeps = 200;
  double initial_step = 1.0;
};

struct McmcDiagnostics {
  double acceptance = 1.0;  // over the burn-in sweeps, after tuning
  double step = 0.0;
  bool exact = false;  // no chain was run
  bool ok() const { return exact || (acceptance >= 0.1 && acceptance <= 0.9); }
};

/// Sampler for mu(dx | Px = y): the product law e^{-psi} conditioned on every
/// block mean. Gaussian model: exact (a block-centred standard normal vector
/// added to the lift). Otherwise: independent tilted draws shifted onto the
/// block mean, followed by pairwise exchange Metropolis moves
/// (x_i, x_j) -> (x_i + d, x_j - d) inside each block. Every move preserves
/// the block means, so Px = y holds up to rounding.
class ConditionalSampler {
 public:
  ConditionalSampler(const BlockScheme& scheme, const Potential& psi, Vector y, McmcParams params = {})
      : scheme_(scheme), psi_(psi), y_(std::move(y)), params_(params) {
    require_dim(y_.size(), scheme.blocks(), "ConditionalSampler");
    if (!psi.is_gaussian()) {
      tilt_.resize(y_.size());
      for (std::size_t b = 0; b < y_.size(); ++b) tilt_[b] = cramer(psi, y_[b]).sigma;
    }
  }

  template <class Rng>
  Vector sample(Rng& rng, McmcDiagnostics* diag = nullptr) const {
    const std::size_t k = scheme_.block_size(), m = scheme_.blocks();
    Vector x = lift_NPt(scheme_, y_);
    if (k == 1 || psi_.is_gaussian()) {
      if (diag != nullptr) *diag = McmcDiagnostics{1.0, 0.0, true};
    }
    if (k == 1) return x;
    std::normal_distribution<double> normal;
    Vector z(scheme_.sites());
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t j = 0; j < k; ++j)
        z[b * k + j] = psi_.is_gaussian() ? normal(rng) : sample_tilted_site(psi_, tilt_[b], rng) - y_[b];
    const Vector zf = fluctuation(scheme_, z);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += zf[i];
    if (psi_.is_gaussian()) return x;
    run_exchange(x, rng, diag);
    return x;
  }

 private:
  template <class Rng>
  void run_exchange(Vector& x, Rng& rng, McmcDiagnostics* diag) const {
    const std::size_t k = scheme_.block_size(), m = scheme_.blocks();
    std::uniform_int_distribution<std::size_t> pick(0, k - 1), pick_other(0, k - 2);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double step = params_.initial_step;
    auto sweep = [&](double s) {
      std::size_t acc = 0, tot = 0;
      for (std::size_t b = 0; b < m; ++b) {
        double* blk = x.data() + b * k;
        for (std::size_t p = 0; p < k; ++p) {
          const std::size_t i = pick(rng);
          std::size_t j = pick_other(rng);
          if (j >= i) ++j;
          const double d = s * (2.0 * unif(rng) - 1.0);
          const double de = psi_.value(blk[i] + d) + psi_.value(blk[j] - d) - psi_.value(blk[i]) - psi_.value(blk[j]);
          ++tot;
          if (de <= 0.0 || unif(rng) < std::exp(-de)) {
            blk[i] += d;
            blk[j] -= d;
            ++acc;
          }
        }
      }
      return double(acc) / double(tot);
    };
    for (std::size_t t = 0; t < params_.tune_sweeps; ++t) {
      const double a = sweep(step);
      step *= std::exp(a - 0.5);
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < params_.burn_in_sweeps; ++t) acc += sweep(step);
    if (diag != nullptr) {
      diag->acceptance = params_.burn_in_sweeps == 0 ? 1.0 : acc / double(params_.burn_in_sweeps);
      diag->step = step;
    }
  }

  BlockScheme scheme_;
  Potential psi_;
  Vector y_;
  McmcParams params_;
  Vector tilt_;
};

/// Approximate sampler for the local Gibbs state exp(NP^t grad Hbar(eta) . x) mu(dx)
/// on the hyperplane of mean m = mean(eta): independent tilted sites, shifted
/// so the average tilted mean is m, then projected onto the hyperplane by
/// removing the sample mean deviation. Exact in the Gaussian model.
class LocalGibbsSampler {
 public:
  LocalGibbsSampler(const BlockScheme& scheme, const PsiKTable& table, std::span<const double> eta)
      : scheme_(scheme), psi_(table.potential), target_mean_(mean(eta)) {
    require_dim(eta.size(), scheme.blocks(), "LocalGibbsSampler");
    const Vector g = macro_grad_H(eta, table);
    // Offset of the tilt fixing the hyperplane: the mean of the tilted laws.
    double lo = -20.0, hi = 20.0;
    auto avg_mean = [&](double s0) {
      double acc = 0.0;
      for (double gi : g) acc += psi_.is_gaussian() ? gi + s0 : tilted_moments(psi_, gi + s0).mean;
      return acc / double(g.size());
    };
    double s0 = target_mean_;
    if (!psi_.is_gaussian()) {
      for (int it = 0; it < 100; ++it) {
        s0 = 0.5 * (lo + hi);
        (avg_mean(s0) < target_mean_ ? lo : hi) = s0;
      }
    }
    tilt_.resize(g.size());
    for (std::size_t b = 0; b < g.size(); ++b) tilt_[b] = g[b] + s0;
  }

  template <class Rng>
  Vector sample(Rng& rng) const {
    const std::size_t k = scheme_.block_size();
    Vector x(scheme_.sites());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = sample_tilted_site(psi_, tilt_[i / k], rng);
    const double shift = mean(x) - target_mean_;
    for (double& v : x) v -= shift;
    return x;
  }

  const Vector& block_tilts() const { return tilt_; }

 private:
  BlockScheme scheme_;
  Potential psi_;
  double target_mean_;
  Vector tilt_;
};

// ---- ensembles -------------------------------------------------------------

enum class InitialKind { lift, local_gibbs, conditional };

inline std::string to_string(InitialKind k) {
  switch (k) {
    case InitialKind::lift: return "lift";
    case InitialKind::local_gibbs: return "local_gibbs";
    case InitialKind::conditional: return "conditional";
  }
  return "?";
}

inline InitialKind parse_initial_kind(const std::string& s) {
  if (s == "lift") return InitialKind::lift;
  if (s == "local_gibbs") return InitialKind::local_gibbs;
  if (s == "conditional") return InitialKind::conditional;
  throw ConfigError("unknown initial data kind '" + s + "' (expected lift, local_gibbs or conditional)");
}

struct InitialData {
  InitialKind kind = InitialKind::lift;
  Vector eta0;                          // macroscopic profile, one value per block
  const PsiKTable* table = nullptr;     // needed by local_gibbs
  McmcParams mcmc;
  /// Optional explicit start (overrides kind), e.g. a stationary draw.
  std::function<Vector(std::mt19937_64&)> custom;
};

struct SimConfig {
  std::size_t n = 64;
  std::size_t m = 8;
  Potential potential;
  double dt = 1e-4;
  double t_end = 0.1;
  std::size_t r = 100;
  std::uint64_t seed = 1;
  Integrator integrator = Integrator::exponential;
  Vector checkpoints;  // sorted, within [0, t_end]
  std::size_t threads = 1;

  BlockScheme scheme() const { return {n, m}; }

  void validate() const {
    (void)scheme();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim.dt must be positive");
    if (!(t_end >= 0.0)) throw ConfigError("sim.t_end must be non-negative");
    if (r == 0) throw ConfigError("sim.r must be positive");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) throw ConfigError("checkpoints must be sorted");
    for (double c : checkpoints)
      if (c < 0.0 || c > t_end * (1.0 + 1e-12)) throw ConfigError("checkpoint outside [0, t_end]");
    if (integrator == Integrator::explicit_euler && dt > explicit_stability_bound(n, potential)) {
      throw ConfigError("sim.dt = " + std::to_string(dt) + " exceeds the explicit stability bound " +
                        std::to_string(explicit_stability_bound(n, potential)));
    }
  }
};

/// Scalar observables of one state at one checkpoint.
using Observer = std::function<Vector(std::size_t checkpoint, std::span<const double> x)>;

/// Per-checkpoint, per-trajectory observable values. Reductions run in
/// trajectory order, so results do not depend on the thread count.
struct EnsembleResult {
  Vector times;
  std::size_t r = 0;
  std::size_t q = 0;  // observables per state
  std::vector<double> values;  // [checkpoint][trajectory][observable]
  double max_mean_drift = 0.0;
  double min_mcmc_acceptance = 1.0;
  double max_mcmc_acceptance = 1.0;
  bool mcmc_ok = true;

  double at(std::size_t c, std::size_t t, std::size_t j) const { return values[(c * r + t) * q + j]; }

  double mean_of(std::size_t c, std::size_t j) const {
    double acc = 0.0;
    for (std::size_t t = 0; t < r; ++t) acc += at(c, t, j);
    return acc / double(r);
  }

  /// Standard error of mean_of.
  double stderr_of(std::size_t c, std::size_t j) const {
    if (r < 2) return 0.0;
    const double mu = mean_of(c, j);
    double acc = 0.0;
    for (std::size_t t = 0; t < r; ++t) acc += (at(c, t, j) - mu) * (at(c, t, j) - mu);
    return std::sqrt(acc / double(r - 1) / double(r));
  }
};

namespace detail {
/// Step schedule from one checkpoint to the next: nsteps of size h landing exactly.
struct Segment {
  double t0, t1;
  std::size_t steps;
  double h;
};

inline std::vector<Segment> plan_segments(const Vector& checkpoints, double dt) {
  std::vector<Segment> segs;
  double t = 0.0;
  for (double c : checkpoints) {
    const double len = c - t;
    const auto steps = len <= 0.0 ? std::size_t(0) : std::size_t(std::ceil(len / dt - 1e-9));
    segs.push_back({t, c, steps, steps == 0 ? 0.0 : len / double(steps)});
    t = c;
  }
  return segs;
}
}  // namespace detail

/// Integrates cfg.r independent trajectories and records observer(c, x) at
/// every checkpoint c. Throws NumericalError on a non-finite state.
inline EnsembleResult run_ensemble(const SimConfig& cfg, const InitialData& init, const Observer& observer) {
  cfg.validate();
  const BlockScheme scheme = cfg.scheme();
  const CirculantOps ops(scheme.dim());
  const auto segs = detail::plan_segments(cfg.checkpoints, cfg.dt);

  std::vector<MicroStepper> steppers;
  steppers.reserve(segs.size());
  for (const auto& s : segs)
    steppers.emplace_back(ops, cfg.potential, s.steps == 0 ? cfg.dt : s.h,
                          s.steps == 0 && cfg.integrator == Integrator::explicit_euler ? Integrator::exponential
                                                                                      : cfg.integrator);

  std::unique_ptr<ConditionalSampler> cond;
  std::unique_ptr<LocalGibbsSampler> gibbs;
  if (!init.custom) {
    require_dim(init.eta0.size(), scheme.blocks(), "run_ensemble initial profile");
    if (init.kind == InitialKind::conditional)
      cond = std::make_unique<ConditionalSampler>(scheme, cfg.potential, init.eta0, init.mcmc);
    if (init.kind == InitialKind::local_gibbs) {
      if (init.table == nullptr) throw ConfigError("local_gibbs initial data needs a psi_K table");
      gibbs = std::make_unique<LocalGibbsSampler>(scheme, *init.table, init.eta0);
    }
  }

  EnsembleResult res;
  res.times = cfg.checkpoints;
  res.r = cfg.r;
  // Probe the observable count on the lifted profile.
  if (!cfg.checkpoints.empty()) {
    const Vector probe = init.eta0.size() == scheme.blocks() ? lift_NPt(scheme, init.eta0) : Vector(scheme.sites());
    res.q = observer(0, probe).size();
  }
  res.values.assign(cfg.checkpoints.size() * cfg.r * res.q, 0.0);
  std::vector<double> drift_by_traj(cfg.r, 0.0), acc_by_traj(cfg.r, 1.0);

  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto run_one = [&](std::size_t t) {
    auto rng = trajectory_rng(cfg.seed, t);
    Vector x;
    McmcDiagnostics diag;
    if (init.custom) x = init.custom(rng);
    else if (cond) x = cond->sample(rng, &diag);
    else if (gibbs) x = gibbs->sample(rng);
    else x = lift_NPt(scheme, init.eta0);
    require_dim(x.size(), scheme.sites(), "run_ensemble initial state");
    acc_by_traj[t] = diag.acceptance;
    const double m0 = mean(x);
    double time = 0.0;
    for (std::size_t c = 0; c < segs.size(); ++c) {
      for (std::size_t s = 0; s < segs[c].steps; ++s) {
        steppers[c].step(x, rng);
        time = segs[c].t0 + double(s + 1) * segs[c].h;
      }
      if (!all_finite(x)) {
        throw NumericalError("run_ensemble: non-finite state in trajectory " + std::to_string(t) + " at t = " +
                             std::to_string(time));
      }
      drift_by_traj[t] = std::max(drift_by_traj[t], std::abs(mean(x) - m0));
      const Vector obs = observer(c, x);
      require_dim(obs.size(), res.q, "observer output");
      std::copy(obs.begin(), obs.end(), res.values.begin() + std::ptrdiff_t((c * cfg.r + t) * res.q));
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, cfg.r));
  auto worker = [&](std::size_t w) {
    for (std::size_t t = w; t < cfg.r; t += threads) {
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        run_one(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t t = 0; t < cfg.r; ++t) {
    res.max_mean_drift = std::max(res.max_mean_drift, drift_by_traj[t]);
    res.min_mcmc_acceptance = std::min(res.min_mcmc_acceptance, acc_by_traj[t]);
    res.max_mcmc_acceptance = t == 0 ? acc_by_traj[t] : std::max(res.max_mcmc_acceptance, acc_by_traj[t]);
  }
  if (cond && !cfg.potential.is_gaussian())
    res.mcmc_ok = res.min_mcmc_acceptance >= 0.1 && res.max_mcmc_acceptance <= 0.9;
  return res;
}

}  // namespace twoscale
