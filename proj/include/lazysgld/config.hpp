#pragma once

// Flat `key = value` run configuration shared by every subcommand. Every key
// has a default; unknown keys and malformed values raise ConfigError.

#include "lazysgld/core.hpp"
#include "lazysgld/io.hpp"
#include "lazysgld/loss.hpp"
#include "lazysgld/sgld.hpp"

#include <json.hpp>

#include <charconv>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace lazysgld {

enum class ModelKind { shallow, deep };
enum class InitScheme { centered, symmetric };

struct RunConfig {
  // Model.
  ModelKind model = ModelKind::shallow;
  Index d = 8;
  Index width = 200;
  Index depth = 2;
  InitScheme init = InitScheme::centered;
  std::uint64_t init_seed = 7;
  bool vary_init = true;
  // Data.
  Index n = 200;
  Index m_prime = 1;
  double c_star = 1.0;
  double label_noise = 1.0;
  std::uint64_t data_seed = 1;
  std::string data_csv;
  Index heldout_n = 0;
  // Dynamics.
  double alpha = 256.0;
  std::vector<double> alphas{0.125, 8.0, 32.0, 256.0};
  double eta_alpha = 1e-2;
  double dt = 1e-2;
  double horizon = 50.0;
  std::uint64_t seed = 0;
  NoiseMode noise_mode = NoiseMode::factor;
  Index record_every = 10;
  bool track_lambda = true;
  Index dense_cap = kDefaultDenseCap;
  // Ensembles.
  Index seeds = 4;
  Index trials = 100;
  double radius = 0.0;
  // Verification.
  double ntk_floor = 1e-12;
  Index hessian_points = 4;
  Index probe_count = 200;
  NormConvention norm_convention = NormConvention::averaged;

  SgldConfig sgld() const {
    SgldConfig c;
    c.alpha = alpha;
    c.eta_alpha = eta_alpha;
    c.dt = dt;
    c.horizon = horizon;
    c.seed = seed;
    c.noise_mode = noise_mode;
    c.record_every = record_every;
    c.dense_cap = dense_cap;
    return c;
  }

  void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t to_seed(const std::string& key, const std::string& v) {
  const std::int64_t s = to_int(key, v);
  if (s < 0) throw ConfigError(key + ": seeds are nonnegative");
  return static_cast<std::uint64_t>(s);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

/// Shortest text that parses back to the same double.
inline std::string show(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += show(xs[i]);
  }
  return s;
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  static const std::vector<ConfigKey> keys = {
      {"model", "network family: shallow or deep",
       [](RunConfig& c, const std::string& v) {
         if (v == "shallow") c.model = ModelKind::shallow;
         else if (v == "deep") c.model = ModelKind::deep;
         else throw ConfigError("model: expected shallow or deep, got '" + v + "'");
       },
       [](const RunConfig& c) { return std::string(c.model == ModelKind::deep ? "deep" : "shallow"); }},
      {"d", "input dimension",
       [](RunConfig& c, const std::string& v) { c.d = to_int("d", v); },
       [](const RunConfig& c) { return std::to_string(c.d); }},
      {"width", "hidden width m",
       [](RunConfig& c, const std::string& v) { c.width = to_int("width", v); },
       [](const RunConfig& c) { return std::to_string(c.width); }},
      {"depth", "hidden layers of the deep model",
       [](RunConfig& c, const std::string& v) { c.depth = to_int("depth", v); },
       [](const RunConfig& c) { return std::to_string(c.depth); }},
      {"init", "zero-output initialization: centered or symmetric",
       [](RunConfig& c, const std::string& v) {
         if (v == "centered") c.init = InitScheme::centered;
         else if (v == "symmetric") c.init = InitScheme::symmetric;
         else throw ConfigError("init: expected centered or symmetric, got '" + v + "'");
       },
       [](const RunConfig& c) {
         return std::string(c.init == InitScheme::symmetric ? "symmetric" : "centered");
       }},
      {"init_seed", "seed of the parameter initialization",
       [](RunConfig& c, const std::string& v) { c.init_seed = to_seed("init_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.init_seed); }},
      {"vary_init", "sweeps draw a fresh initialization per seed (init_seed + seed index)",
       [](RunConfig& c, const std::string& v) { c.vary_init = to_bool("vary_init", v); },
       [](const RunConfig& c) { return std::string(c.vary_init ? "true" : "false"); }},
      {"n", "training samples",
       [](RunConfig& c, const std::string& v) { c.n = to_int("n", v); },
       [](const RunConfig& c) { return std::to_string(c.n); }},
      {"m_prime", "teacher width",
       [](RunConfig& c, const std::string& v) { c.m_prime = to_int("m_prime", v); },
       [](const RunConfig& c) { return std::to_string(c.m_prime); }},
      {"c_star", "teacher output weight (all units)",
       [](RunConfig& c, const std::string& v) { c.c_star = to_double("c_star", v); },
       [](const RunConfig& c) { return show(c.c_star); }},
      {"label_noise", "standard deviation of the label noise",
       [](RunConfig& c, const std::string& v) { c.label_noise = to_double("label_noise", v); },
       [](const RunConfig& c) { return show(c.label_noise); }},
      {"data_seed", "seed of the teacher and the samples",
       [](RunConfig& c, const std::string& v) { c.data_seed = to_seed("data_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.data_seed); }},
      {"data_csv", "train on this CSV (last column is the target) instead of teacher data",
       [](RunConfig& c, const std::string& v) { c.data_csv = v; },
       [](const RunConfig& c) { return c.data_csv; }},
      {"heldout_n", "fresh teacher samples for held-out error in summaries (0 = off)",
       [](RunConfig& c, const std::string& v) { c.heldout_n = to_int("heldout_n", v); },
       [](const RunConfig& c) { return std::to_string(c.heldout_n); }},
      {"alpha", "output scale for simulate and verify",
       [](RunConfig& c, const std::string& v) { c.alpha = to_double("alpha", v); },
       [](const RunConfig& c) { return show(c.alpha); }},
      {"alphas", "comma-separated output scales for sweep and exit-prob",
       [](RunConfig& c, const std::string& v) {
         c.alphas.clear();
         std::istringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) c.alphas.push_back(to_double("alphas", trim(item)));
       },
       [](const RunConfig& c) { return join(c.alphas); }},
      {"eta_alpha", "noise factor eta_alpha",
       [](RunConfig& c, const std::string& v) { c.eta_alpha = to_double("eta_alpha", v); },
       [](const RunConfig& c) { return show(c.eta_alpha); }},
      {"dt", "Euler-Maruyama step",
       [](RunConfig& c, const std::string& v) { c.dt = to_double("dt", v); },
       [](const RunConfig& c) { return show(c.dt); }},
      {"horizon", "simulated time",
       [](RunConfig& c, const std::string& v) { c.horizon = to_double("horizon", v); },
       [](const RunConfig& c) { return show(c.horizon); }},
      {"seed", "Brownian seed (trial i uses seed + i)",
       [](RunConfig& c, const std::string& v) { c.seed = to_seed("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"noise_mode", "factor, dense_sqrt or none",
       [](RunConfig& c, const std::string& v) { c.noise_mode = parse_noise_mode(v); },
       [](const RunConfig& c) { return std::string(to_string(c.noise_mode)); }},
      {"record_every", "record one row every this many steps",
       [](RunConfig& c, const std::string& v) { c.record_every = to_int("record_every", v); },
       [](const RunConfig& c) { return std::to_string(c.record_every); }},
      {"track_lambda", "record the smallest NTK eigenvalue along trajectories",
       [](RunConfig& c, const std::string& v) { c.track_lambda = to_bool("track_lambda", v); },
       [](const RunConfig& c) { return std::string(c.track_lambda ? "true" : "false"); }},
      {"dense_cap", "largest parameter count for dense p x p objects",
       [](RunConfig& c, const std::string& v) { c.dense_cap = to_int("dense_cap", v); },
       [](const RunConfig& c) { return std::to_string(c.dense_cap); }},
      {"seeds", "trajectories per alpha in sweeps",
       [](RunConfig& c, const std::string& v) { c.seeds = to_int("seeds", v); },
       [](const RunConfig& c) { return std::to_string(c.seeds); }},
      {"trials", "trajectories per alpha in exit-prob (at least 30)",
       [](RunConfig& c, const std::string& v) { c.trials = to_int("trials", v); },
       [](const RunConfig& c) { return std::to_string(c.trials); }},
      {"radius", "exit radius; 0 derives lambda / Lip(Dh) from the instance",
       [](RunConfig& c, const std::string& v) { c.radius = to_double("radius", v); },
       [](const RunConfig& c) { return show(c.radius); }},
      {"ntk_floor", "smallest accepted NTK eigenvalue at initialization",
       [](RunConfig& c, const std::string& v) { c.ntk_floor = to_double("ntk_floor", v); },
       [](const RunConfig& c) { return show(c.ntk_floor); }},
      {"hessian_points", "dense-Hessian probe points in verify",
       [](RunConfig& c, const std::string& v) { c.hessian_points = to_int("hessian_points", v); },
       [](const RunConfig& c) { return std::to_string(c.hessian_points); }},
      {"probe_count", "random pairs for the sampled Lipschitz quotient in verify",
       [](RunConfig& c, const std::string& v) { c.probe_count = to_int("probe_count", v); },
       [](const RunConfig& c) { return std::to_string(c.probe_count); }},
      {"norm_convention", "strong-convexity constants used for bound checks: averaged or per_sample",
       [](RunConfig& c, const std::string& v) { c.norm_convention = parse_norm_convention(v); },
       [](const RunConfig& c) { return std::string(to_string(c.norm_convention)); }},
  };
  return keys;
}

inline void RunConfig::validate() const {
  if (d < 1 || width < 1 || n < 1 || m_prime < 1) {
    throw ConfigError("d, width, n and m_prime must be positive");
  }
  if (depth < 1) throw ConfigError("depth must be positive");
  if (init == InitScheme::symmetric && width % 2 != 0) {
    throw ConfigError("symmetric initialization needs an even width");
  }
  if (init == InitScheme::symmetric && model == ModelKind::deep) {
    throw ConfigError("symmetric initialization is only defined for the shallow model");
  }
  if (heldout_n < 0) throw ConfigError("heldout_n must be nonnegative");
  if (!(label_noise >= 0.0)) throw ConfigError("label_noise must be nonnegative");
  if (alphas.empty()) throw ConfigError("alphas must not be empty");
  for (double a : alphas) {
    if (!(a > 0.0)) throw ConfigError("alphas must be positive");
  }
  if (seeds < 1) throw ConfigError("seeds must be at least 1");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(radius >= 0.0)) throw ConfigError("radius must be nonnegative");
  if (hessian_points < 0 || probe_count < 0) throw ConfigError("probe counts must be nonnegative");
  sgld().validate();
}

/// Applies one `key=value` (or `key = value`) assignment.
inline void apply_setting(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = detail::trim(assignment.substr(0, eq));
  const std::string value = detail::trim(assignment.substr(eq + 1));
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

/// Parses config text on top of `cfg`. Blank lines and `#` comments are ignored.
inline void parse_config(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      apply_setting(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline RunConfig load_config(const fs::path& path) {
  RunConfig cfg;
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  parse_config(cfg, text);
  return cfg;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_keys()) j[k.name] = k.get(cfg);
  return j;
}

/// Canonical text form: one `key = value` line per key, in registry order.
inline std::string config_text(const RunConfig& cfg) {
  std::string s;
  for (const auto& k : config_keys()) s += k.name + " = " + k.get(cfg) + '\n';
  return s;
}

}  // namespace lazysgld
