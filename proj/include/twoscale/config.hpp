#pragma once

// Experiment configuration: an INI file with sections, overridable from the
// command line. Every field has a default; unknown keys are rejected.

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "twoscale/errors.hpp"
#include "twoscale/micro_sim.hpp"

namespace twoscale {

struct ExperimentConfig {
  std::string mode = "verify";

  // [model]
  double a = 0.0, b = 1.0;
  // [profile] zeta0 = mean + amplitude cos(2 pi theta)
  double profile_mean = 0.0, amplitude = 0.5;
  // [schedule]
  std::vector<std::pair<std::size_t, std::size_t>> schedule{{128, 16}, {256, 16}, {512, 32}};
  // [sim]
  double dt = 2e-5;
  double t_end = 0.1;
  std::size_t r = 200;
  std::string integrator = "exponential";
  std::size_t checkpoints = 11;
  std::string initial = "conditional";
  std::size_t tune_sweeps = 50, burn_in = 200;
  // [tables]
  double m_max = 2.5;
  double table_h = 1.0 / 64.0;
  double conv_mesh = 1.0 / 64.0;
  std::string cache_dir;
  // [pde]
  std::size_t m_pde = 256;
  double adv = -1.0;
  // [oracle]
  double oracle_h = 1.0 / 64.0;
  double oracle_radius = 6.0;
  std::size_t oracle_steps = 200;
  // [verify]
  std::size_t verify_n = 48, verify_m = 8;
  // [run]
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool deterministic = true;
  std::string out = "out";

  Potential potential() const { return Potential(a, b); }
  Integrator integrator_kind() const { return parse_integrator(integrator); }
  InitialKind initial_kind() const { return parse_initial_kind(initial); }
  TableGrid table_grid() const { return {m_max, table_h}; }

  Vector checkpoint_times() const {
    Vector t;
    if (checkpoints == 1) return {t_end};
    for (std::size_t i = 0; i < checkpoints; ++i) t.push_back(t_end * double(i) / double(checkpoints - 1));
    return t;
  }

  void validate() const {
    try {
      (void)potential();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    (void)integrator_kind();
    (void)initial_kind();
    if (schedule.empty()) throw ConfigError("schedule.pairs: empty schedule");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const auto [n, m] = schedule[i];
      if (m < 3 || n % m != 0) {
        throw ConfigError("schedule.pairs: M = " + std::to_string(m) + " must be >= 3 and divide N = " + std::to_string(n));
      }
      if (i > 0) {
        const auto [pn, pm] = schedule[i - 1];
        if (n <= pn) throw ConfigError("schedule.pairs: N must increase along the schedule");
        if (n * pm < pn * m) throw ConfigError("schedule.pairs: N/M must not decrease along the schedule");
      }
    }
    if (!(dt > 0.0)) throw ConfigError("sim.dt must be positive");
    if (!(t_end >= 0.0)) throw ConfigError("sim.t_end must be non-negative");
    if (r < 2) throw ConfigError("sim.r must be at least 2");
    if (checkpoints < 1) throw ConfigError("sim.checkpoints must be at least 1");
    if (!(m_max > 0.0) || !(table_h > 0.0) || !(conv_mesh > 0.0)) throw ConfigError("tables: m_max, h, conv_mesh must be positive");
    try {
      (void)table_grid().intervals();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("tables: ") + e.what());
    }
    if (std::abs(profile_mean) + std::abs(amplitude) >= m_max) throw ConfigError("profile: amplitude leaves the table interval");
    if (m_pde < 3) throw ConfigError("pde.m_pde must be at least 3");
    if (!(oracle_h > 0.0) || !(oracle_radius > 0.0)) throw ConfigError("oracle: h and radius must be positive");
    if (verify_m < 3 || verify_n % verify_m != 0) throw ConfigError("verify: m must be >= 3 and divide n");
    if (threads == 0) throw ConfigError("run.threads must be positive");
  }

  nlohmann::json to_json() const {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [n, m] : schedule) pairs.push_back({n, m});
    return {{"mode", mode},
            {"model", {{"a", a}, {"b", b}}},
            {"profile", {{"mean", profile_mean}, {"amplitude", amplitude}}},
            {"schedule", pairs},
            {"sim",
             {{"dt", dt},
              {"t_end", t_end},
              {"r", r},
              {"integrator", integrator},
              {"checkpoints", checkpoints},
              {"initial", initial},
              {"tune_sweeps", tune_sweeps},
              {"burn_in", burn_in}}},
            {"tables", {{"m_max", m_max}, {"h", table_h}, {"conv_mesh", conv_mesh}, {"cache_dir", cache_dir}}},
            {"pde", {{"m_pde", m_pde}, {"adv", adv}}},
            {"oracle", {{"h", oracle_h}, {"radius", oracle_radius}, {"steps", oracle_steps}}},
            {"verify", {{"n", verify_n}, {"m", verify_m}}},
            {"run", {{"seed", seed}, {"threads", threads}, {"deterministic", deterministic}, {"out", out}}}};
  }
};

inline std::vector<std::pair<std::size_t, std::size_t>> parse_schedule(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, e - b + 1);
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument("missing ':'");
      std::size_t used = 0;
      const auto n = std::stoull(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("N");
      const std::string ms = item.substr(colon + 1);
      const auto m = std::stoull(ms, &used);
      if (used != ms.size()) throw std::invalid_argument("M");
      out.emplace_back(n, m);
    } catch (const std::exception&) {
      throw ConfigError("schedule.pairs: cannot parse '" + item + "' (expected N:M)");
    }
  }
  return out;
}

namespace detail {

template <class T>
T config_get(const boost::property_tree::ptree& tree, const std::string& key, const T& fallback) {
  const auto node = tree.get_child_optional(boost::property_tree::ptree::path_type(key, '.'));
  if (!node) return fallback;
  try {
    return node->get_value<T>();
  } catch (const boost::property_tree::ptree_bad_data&) {
    throw ConfigError(key + ": cannot parse '" + node->data() + "'");
  }
}

template <>
inline bool config_get<bool>(const boost::property_tree::ptree& tree, const std::string& key, const bool& fallback) {
  const std::string v = config_get<std::string>(tree, key, fallback ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

/// Applies an INI document on top of `cfg`.
inline void apply_ini(std::istream& in, ExperimentConfig& cfg, const std::string& source = "<config>") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::set<std::string> known = {
      "model.a",         "model.b",          "profile.mean",    "profile.amplitude", "schedule.pairs",
      "sim.dt",          "sim.t_end",        "sim.r",           "sim.integrator",    "sim.checkpoints",
      "sim.initial",     "sim.tune_sweeps",  "sim.burn_in",     "tables.m_max",      "tables.h",
      "tables.conv_mesh", "tables.cache_dir", "pde.m_pde",      "pde.adv",           "oracle.h",
      "oracle.radius",   "oracle.steps",     "verify.n",        "verify.m",          "run.seed",
      "run.threads",     "run.deterministic", "run.out"};
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(source + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!known.count(full)) throw ConfigError(source + ": unknown key '" + full + "'");
    }
  }
  using detail::config_get;
  cfg.a = config_get(tree, "model.a", cfg.a);
  cfg.b = config_get(tree, "model.b", cfg.b);
  cfg.profile_mean = config_get(tree, "profile.mean", cfg.profile_mean);
  cfg.amplitude = config_get(tree, "profile.amplitude", cfg.amplitude);
  if (tree.get_child_optional(boost::property_tree::ptree::path_type("schedule.pairs", '.')))
    cfg.schedule = parse_schedule(tree.get<std::string>("schedule.pairs"));
  cfg.dt = config_get(tree, "sim.dt", cfg.dt);
  cfg.t_end = config_get(tree, "sim.t_end", cfg.t_end);
  cfg.r = config_get(tree, "sim.r", cfg.r);
  cfg.integrator = config_get(tree, "sim.integrator", cfg.integrator);
  cfg.checkpoints = config_get(tree, "sim.checkpoints", cfg.checkpoints);
  cfg.initial = config_get(tree, "sim.initial", cfg.initial);
  cfg.tune_sweeps = config_get(tree, "sim.tune_sweeps", cfg.tune_sweeps);
  cfg.burn_in = config_get(tree, "sim.burn_in", cfg.burn_in);
  cfg.m_max = config_get(tree, "tables.m_max", cfg.m_max);
  cfg.table_h = config_get(tree, "tables.h", cfg.table_h);
  cfg.conv_mesh = config_get(tree, "tables.conv_mesh", cfg.conv_mesh);
  cfg.cache_dir = config_get(tree, "tables.cache_dir", cfg.cache_dir);
  cfg.m_pde = config_get(tree, "pde.m_pde", cfg.m_pde);
  cfg.adv = config_get(tree, "pde.adv", cfg.adv);
  cfg.oracle_h = config_get(tree, "oracle.h", cfg.oracle_h);
  cfg.oracle_radius = config_get(tree, "oracle.radius", cfg.oracle_radius);
  cfg.oracle_steps = config_get(tree, "oracle.steps", cfg.oracle_steps);
  cfg.verify_n = config_get(tree, "verify.n", cfg.verify_n);
  cfg.verify_m = config_get(tree, "verify.m", cfg.verify_m);
  cfg.seed = config_get(tree, "run.seed", cfg.seed);
  cfg.threads = config_get(tree, "run.threads", cfg.threads);
  cfg.deterministic = config_get(tree, "run.deterministic", cfg.deterministic);
  cfg.out = config_get(tree, "run.out", cfg.out);
}

}  // namespace twoscale
