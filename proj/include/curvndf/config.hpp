#pragma once

#include "curvndf/evaluate.hpp"
#include "curvndf/field_net.hpp"
#include "curvndf/mcl.hpp"
#include "curvndf/scene_oracle.hpp"
#include "curvndf/train.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvndf {

/// Invalid or unknown configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of a run. The file format is one `key = value` per line
/// with `#` comments; keys are listed by config_keys().
struct RunConfig {
  // Positional encoding: `geometric` spaces the bands from pi up to
  // max_frequency, `dyadic` doubles them from pi.
  std::string encoding_kind = "geometric";
  int encoding_bands = 30;
  double encoding_max_frequency = 3.141592653589793;
  NetConfig net;  // dim and encoding are filled in by net_config()
  TrainConfig train;
  std::uint64_t seed = 0;

  // Scene bounding cube in world units. Without an explicit centre the cube
  // is anchored at the centroid of the scan origins.
  double box_size = 50.0;
  std::optional<std::vector<double>> box_center;

  int mesh_resolution = 256;  // marching cubes / squares cells per axis
  int grid_resolution = 128;  // samples per axis of exported grids

  ScannerConfig scanner;
  MclConfig mcl;
  int mcl_grid_samples = 401;  // samples per axis of the cached localisation field

  double eval_band = 0.0;  // world units; 0 uses the truncation distance
  std::size_t eval_samples = 4000;

  void validate() const;
  EncodingConfig encoding() const;
  NetConfig net_config(int dim) const;
};

/// Parses a config. Unknown keys, duplicates and malformed values throw
/// ConfigError naming the offending line.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `key`/`value` pair.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Every key in file order, with the current value, one per line.
std::string config_to_text(const RunConfig& cfg);
std::vector<std::string> config_keys();

/// Bounding cube for a scan set under this config.
Aabb scene_box(const RunConfig& cfg, std::span<const Scan> scans);

}  // namespace curvndf
