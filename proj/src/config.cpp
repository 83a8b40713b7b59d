#include "curvndf/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace curvndf {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(out)) throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": value out of range");
  }
  return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-') throw ConfigError(key + ": expected a non-negative integer");
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CURVNDF_REAL(name, field)                                                          \
  Entry {                                                                                  \
    name, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); },        \
        [](const RunConfig& c) { return fmt(c.field); }                                    \
  }
#define CURVNDF_INT(name, field)                                                           \
  Entry {                                                                                  \
    name, [](RunConfig& c, const std::string& v) { c.field = to_int(name, v); },           \
        [](const RunConfig& c) { return std::to_string(c.field); }                         \
  }
#define CURVNDF_BOOL(name, field)                                                          \
  Entry {                                                                                  \
    name, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); },          \
        [](const RunConfig& c) { return fmt_bool(c.field); }                               \
  }
#define CURVNDF_U64(name, field)                                                           \
  Entry {                                                                                  \
    name, [](RunConfig& c, const std::string& v) { c.field = to_u64(name, v); },           \
        [](const RunConfig& c) { return std::to_string(c.field); }                         \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      CURVNDF_U64("seed", seed),
      Entry{"encoding.kind",
            [](RunConfig& c, const std::string& v) {
              if (v != "geometric" && v != "dyadic") {
                throw ConfigError("encoding.kind: expected geometric or dyadic, got '" + v + "'");
              }
              c.encoding_kind = v;
            },
            [](const RunConfig& c) { return c.encoding_kind; }},
      CURVNDF_INT("encoding.bands", encoding_bands),
      CURVNDF_REAL("encoding.max_frequency", encoding_max_frequency),
      CURVNDF_INT("net.hidden_width", net.hidden_width),
      CURVNDF_INT("net.hidden_layers", net.hidden_layers),
      CURVNDF_REAL("net.omega_first", net.omega_first),
      CURVNDF_REAL("net.omega_hidden", net.omega_hidden),
      Entry{"train.mode",
            [](RunConfig& c, const std::string& v) {
              try {
                c.train.mode = parse_mode(v);
              } catch (const std::exception& e) {
                throw ConfigError(std::string("train.mode: ") + e.what());
              }
            },
            [](const RunConfig& c) { return std::string(to_string(c.train.mode)); }},
      CURVNDF_INT("train.samples_per_ray", train.samples_per_ray),
      CURVNDF_BOOL("train.drop_behind_origin", train.drop_behind_origin),
      CURVNDF_INT("train.warmup_steps", train.warmup_steps),
      CURVNDF_REAL("train.lambda_endpoint", train.weights.endpoint),
      CURVNDF_REAL("train.lambda_eikonal", train.weights.eikonal),
      CURVNDF_REAL("train.lambda_smoothness", train.weights.smoothness),
      CURVNDF_INT("train.neighbors", train.loss.neighbors),
      CURVNDF_BOOL("train.smoothness_literal", train.loss.smoothness_literal),
      CURVNDF_REAL("train.gamma", train.targets.gamma),
      CURVNDF_REAL("train.truncation", train.targets.truncation),
      CURVNDF_REAL("train.min_radius", train.targets.min_radius),
      CURVNDF_REAL("train.max_radius", train.targets.max_radius),
      CURVNDF_REAL("train.learning_rate", train.optim.learning_rate),
      CURVNDF_REAL("train.beta1", train.optim.beta1),
      CURVNDF_REAL("train.beta2", train.optim.beta2),
      CURVNDF_REAL("train.epsilon", train.optim.epsilon),
      CURVNDF_REAL("train.weight_decay", train.optim.weight_decay),
      CURVNDF_INT("train.epochs", train.optim.epochs),
      CURVNDF_INT("train.rays_per_batch", train.optim.rays_per_batch),
      CURVNDF_REAL("box.size", box_size),
      Entry{"box.center",
            [](RunConfig& c, const std::string& v) {
              if (v == "auto") {
                c.box_center.reset();
                return;
              }
              std::istringstream is(v);
              std::vector<double> xs;
              std::string tok;
              while (is >> tok) xs.push_back(to_double("box.center", tok));
              if (xs.size() != 2 && xs.size() != 3) {
                throw ConfigError("box.center: expected `auto` or 2 or 3 coordinates");
              }
              c.box_center = xs;
            },
            [](const RunConfig& c) {
              if (!c.box_center) return std::string("auto");
              std::string s;
              for (double x : *c.box_center) s += (s.empty() ? "" : " ") + fmt(x);
              return s;
            }},
      CURVNDF_INT("mesh.resolution", mesh_resolution),
      CURVNDF_INT("grid.resolution", grid_resolution),
      CURVNDF_INT("scanner.beams", scanner.beams),
      Entry{"scanner.fov_deg",
            [](RunConfig& c, const std::string& v) {
              c.scanner.fov = to_double("scanner.fov_deg", v) * std::numbers::pi / 180.0;
            },
            [](const RunConfig& c) { return fmt(c.scanner.fov * 180.0 / std::numbers::pi); }},
      CURVNDF_REAL("scanner.max_range", scanner.max_range),
      CURVNDF_REAL("scanner.noise_sigma", scanner.noise_sigma),
      CURVNDF_INT("mcl.particles", mcl.particles),
      CURVNDF_REAL("mcl.convergence_std", mcl.convergence_std),
      CURVNDF_REAL("mcl.gate_translation", mcl.gate_translation),
      CURVNDF_REAL("mcl.gate_rotation", mcl.gate_rotation),
      CURVNDF_REAL("mcl.sigma_z", mcl.sigma_z),
      CURVNDF_REAL("mcl.odom_trans_base", mcl.odom_trans_base),
      CURVNDF_REAL("mcl.odom_trans_frac", mcl.odom_trans_frac),
      CURVNDF_REAL("mcl.odom_rot_base", mcl.odom_rot_base),
      CURVNDF_REAL("mcl.odom_rot_frac", mcl.odom_rot_frac),
      CURVNDF_INT("mcl.runs", mcl.runs),
      CURVNDF_INT("mcl.beams", mcl.beams),
      CURVNDF_INT("mcl.grid_samples", mcl_grid_samples),
      CURVNDF_REAL("eval.band", eval_band),
      Entry{"eval.samples",
            [](RunConfig& c, const std::string& v) {
              const long long n = to_integer("eval.samples", v);
              if (n < 1) throw ConfigError("eval.samples: must be at least 1");
              c.eval_samples = static_cast<std::size_t>(n);
            },
            [](const RunConfig& c) { return std::to_string(c.eval_samples); }},
  };
  return table;
}

#undef CURVNDF_REAL
#undef CURVNDF_INT
#undef CURVNDF_BOOL
#undef CURVNDF_U64

}  // namespace

EncodingConfig RunConfig::encoding() const {
  if (encoding_bands < 1) throw ConfigError("encoding.bands must be at least 1");
  EncodingConfig enc;
  if (encoding_kind == "dyadic") {
    enc = EncodingConfig::dyadic(encoding_bands);
  } else {
    if (encoding_bands > 1 && !(encoding_max_frequency >= std::numbers::pi)) {
      throw ConfigError("encoding.max_frequency must be at least pi when more than one band is used");
    }
    enc = EncodingConfig::geometric(encoding_bands, encoding_max_frequency);
  }
  return enc;
}

NetConfig RunConfig::net_config(int dim) const {
  NetConfig cfg = net;
  cfg.dim = dim;
  cfg.encoding = encoding();
  return cfg;
}

void RunConfig::validate() const {
  auto wrap = [](const char* what, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string(what) + ": " + e.what());
    }
  };
  wrap("network", [&] { net_config(3).validate(); });
  wrap("training", [&] { train.validate(); });
  wrap("scanner", [&] { scanner.validate(); });
  wrap("mcl", [&] { mcl.validate(); });
  if (!(box_size > 0.0)) throw ConfigError("box.size must be positive");
  if (mesh_resolution < 1) throw ConfigError("mesh.resolution must be at least 1");
  if (grid_resolution < 2) throw ConfigError("grid.resolution must be at least 2");
  if (mcl_grid_samples < 2) throw ConfigError("mcl.grid_samples must be at least 2");
  if (eval_band < 0.0) throw ConfigError("eval.band must be non-negative");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

Aabb scene_box(const RunConfig& cfg, std::span<const Scan> scans) {
  if (scans.empty()) throw ConfigError("no scans to anchor the scene box");
  const int m = scans.front().pose.dim();
  if (!cfg.box_center) return box_around_origins(scans, cfg.box_size);
  if (static_cast<int>(cfg.box_center->size()) != m) {
    throw ConfigError("box.center has " + std::to_string(cfg.box_center->size()) +
                      " coordinates but the scans are " + std::to_string(m) + "D");
  }
  Vec c(m);
  for (int a = 0; a < m; ++a) c(a) = (*cfg.box_center)[static_cast<std::size_t>(a)];
  return Aabb::cube(c, 0.5 * cfg.box_size);
}

}  // namespace curvndf
