#include "curvndf/io_store.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace curvndf {
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[6] = {'C', 'C', 'N', 'D', 'F', '\0'};
constexpr double kPoseOrthoTol = 1e-4;

// Explicit little-endian encoding so files are portable across hosts.
template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
void put_f32(std::string& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(const std::string& data, std::string what) : data_(data), what_(std::move(what)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw IoError(what_ + ": truncated file");
  }

  const std::string& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::ostringstream exact_stream() {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  return os;
}

bool is_blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

std::vector<double> parse_reals(const std::string& line, const std::string& what) {
  std::istringstream is(line);
  is.imbue(std::locale::classic());
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw IoError(what + ": not a number: '" + tok + "'");
    }
    if (used != tok.size()) throw IoError(what + ": not a number: '" + tok + "'");
    if (!std::isfinite(v)) throw IoError(what + ": non-finite value");
    out.push_back(v);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

Pose parse_pose_line(const std::string& line) {
  const std::vector<double> v = parse_reals(line, "pose line");
  if (v.size() != 12) {
    throw IoError("pose line needs 12 values, got " + std::to_string(v.size()));
  }
  Mat r(3, 3);
  Vec t(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = v[static_cast<std::size_t>(4 * i + j)];
    t(i) = v[static_cast<std::size_t>(4 * i + 3)];
  }
  if ((r.transpose() * r - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() > kPoseOrthoTol ||
      r.determinant() <= 0.0) {
    throw IoError("pose rotation is not a proper rotation");
  }
  return Pose(project_to_rotation(r), t);
}

std::string format_pose_line(const Pose& pose) {
  Mat r = Mat::Identity(3, 3);
  Vec t = Vec::Zero(3);
  const int m = pose.dim();
  r.topLeftCorner(m, m) = pose.rotation();
  t.head(m) = pose.translation();
  std::ostringstream os = exact_stream();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i + j > 0) os << ' ';
      os << (j < 3 ? r(i, j) : t(i));
    }
  }
  return os.str();
}

std::vector<Vec> read_scan_file(const fs::path& path, ScanFormat format) {
  if (format == ScanFormat::Auto) {
    format = path.filename().string().rfind("scan_", 0) == 0 ? ScanFormat::Xyz : ScanFormat::Kitti;
  }
  const std::string data = read_file(path);
  const std::size_t record = format == ScanFormat::Xyz ? 12 : 16;
  if (data.size() % record != 0) {
    throw IoError(path.string() + ": size " + std::to_string(data.size()) +
                  " is not a multiple of the " + std::to_string(record) + "-byte record");
  }
  Reader rd(data, path.string());
  std::vector<Vec> pts;
  pts.reserve(data.size() / record);
  for (std::size_t i = 0; i < data.size() / record; ++i) {
    Vec p(3);
    for (int a = 0; a < 3; ++a) p(a) = rd.f32();
    if (record == 16) rd.f32();  // intensity
    if (!all_finite(p)) throw IoError(path.string() + ": non-finite point " + std::to_string(i));
    pts.push_back(p);
  }
  return pts;
}

void write_scan_file(const fs::path& path, const std::vector<Vec>& points) {
  std::string data;
  data.reserve(points.size() * 12);
  for (const Vec& p : points) {
    for (int a = 0; a < 3; ++a) put_f32(data, a < p.size() ? static_cast<float>(p(a)) : 0.0f);
  }
  write_file(path, data);
}

std::vector<Scan> load_scans(const fs::path& dir, int dim, ScanFormat format) {
  check_dim(dim);
  std::ifstream in(dir / "poses.txt");
  if (!in) throw IoError("missing " + (dir / "poses.txt").string());
  std::vector<Pose> poses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    try {
      poses.push_back(parse_pose_line(line));
    } catch (const IoError& e) {
      throw IoError("poses.txt line " + std::to_string(lineno) + ": " + e.what());
    }
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() != poses.size()) {
    throw IoError("found " + std::to_string(files.size()) + " scan files but " +
                  std::to_string(poses.size()) + " poses");
  }

  std::vector<Scan> scans;
  scans.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::vector<Vec> pts = read_scan_file(files[i], format);
    if (dim == 3) {
      scans.push_back(Scan{poses[i], std::move(pts)});
      continue;
    }
    const Pose& p = poses[i];
    const Mat& r = p.rotation();
    const bool planar = std::abs(r(2, 2) - 1.0) < 1e-9 && std::abs(p.translation()(2)) < 1e-9;
    if (!planar) throw IoError(files[i].string() + ": pose is not planar");
    std::vector<Vec> flat;
    flat.reserve(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (std::abs(pts[k](2)) > 1e-6) {
        throw IoError(files[i].string() + ": point " + std::to_string(k) + " leaves the plane");
      }
      flat.push_back(pts[k].head(2));
    }
    const Mat r2 = project_to_rotation(r.topLeftCorner(2, 2));
    scans.push_back(Scan{Pose(r2, p.translation().head(2)), std::move(flat)});
  }
  return scans;
}

void save_scans(const fs::path& dir, const std::vector<Scan>& scans) {
  fs::create_directories(dir);
  std::string poses;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    poses += format_pose_line(scans[i].pose) + "\n";
    std::ostringstream name;
    name << "scan_" << std::setw(6) << std::setfill('0') << i << ".bin";
    write_scan_file(dir / name.str(), scans[i].points);
  }
  write_file(dir / "poses.txt", poses);
}

std::vector<TrajectoryPoint> read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TrajectoryPoint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    const auto v = parse_reals(line, path.string() + " line " + std::to_string(lineno));
    if (v.size() != 4) throw IoError(path.string() + " line " + std::to_string(lineno) + ": expected `t x y theta`");
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

void write_trajectory(const fs::path& path, const std::vector<TrajectoryPoint>& traj) {
  std::ostringstream os = exact_stream();
  for (const auto& p : traj) os << p.t << ' ' << p.x << ' ' << p.y << ' ' << p.theta << '\n';
  write_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Model checkpoints
// ---------------------------------------------------------------------------

std::size_t model_header_size(const NetConfig& cfg) {
  const std::size_t layers = cfg.layer_sizes().size();
  const std::size_t h = cfg.encoding.frequencies.size();
  return sizeof(kMagic) + 2 + 1 + 2 + 2 + 4 * layers + 16 + 8 * h +
         8 * static_cast<std::size_t>(cfg.dim) + 8;
}

void save_model(const fs::path& path, const FieldNet& net, const SceneTransform& transform) {
  const NetConfig& cfg = net.config();
  if (transform.center.size() != cfg.dim) throw IoError("scene transform dimension mismatch");
  const std::vector<int> sizes = cfg.layer_sizes();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint16_t>(out, kModelVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.dim));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(cfg.encoding.frequencies.size()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(sizes.size() - 1));
  for (int s : sizes) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  put_f64(out, cfg.omega_first);
  put_f64(out, cfg.omega_hidden);
  for (double f : cfg.encoding.frequencies) put_f64(out, f);
  for (int a = 0; a < cfg.dim; ++a) put_f64(out, transform.center(a));
  put_f64(out, transform.scale);
  for (double p : net.parameters()) put_f64(out, p);
  write_file(path, out);
}

ModelFile load_model(const fs::path& path) {
  const std::string data = read_file(path);
  const std::string what = path.string();
  Reader rd(data, what);
  if (rd.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw IoError(what + ": bad magic, not a model file");
  }
  const auto version = rd.get<std::uint16_t>();
  if (version != kModelVersion) {
    throw IoError(what + ": unsupported model version " + std::to_string(version));
  }
  NetConfig cfg;
  cfg.dim = rd.get<std::uint8_t>();
  const auto h = rd.get<std::uint16_t>();
  const auto layers = rd.get<std::uint16_t>();
  std::vector<int> sizes;
  for (int i = 0; i <= layers; ++i) sizes.push_back(static_cast<int>(rd.get<std::uint32_t>()));
  cfg.omega_first = rd.f64();
  cfg.omega_hidden = rd.f64();
  cfg.encoding.frequencies.clear();
  for (int i = 0; i < h; ++i) cfg.encoding.frequencies.push_back(rd.f64());
  if (layers < 2) throw IoError(what + ": network needs at least one hidden layer");
  cfg.hidden_width = sizes[1];
  cfg.hidden_layers = layers - 1;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw IoError(what + ": invalid network header: " + e.what());
  }
  if (cfg.layer_sizes() != sizes) throw IoError(what + ": layer sizes do not form a valid chain");
  SceneTransform transform;
  transform.center = Vec(cfg.dim);
  for (int a = 0; a < cfg.dim; ++a) transform.center(a) = rd.f64();
  transform.scale = rd.f64();
  if (!all_finite(transform.center) || !(transform.scale > 0.0) || !std::isfinite(transform.scale)) {
    throw IoError(what + ": invalid scene transform");
  }
  const std::size_t count = FieldNet::parameter_count(cfg);
  if (rd.remaining() != 8 * count) {
    throw IoError(what + ": expected " + std::to_string(8 * count) + " parameter bytes, found " +
                  std::to_string(rd.remaining()));
  }
  std::vector<double> params(count);
  for (auto& p : params) p = rd.f64();
  return ModelFile{FieldNet(cfg, std::move(params)), transform};
}

// ---------------------------------------------------------------------------
// Meshes and grids
// ---------------------------------------------------------------------------

namespace {

std::string float_text(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(std::numeric_limits<float>::max_digits10) << static_cast<float>(v);
  return os.str();
}

}  // namespace

void export_mesh_ply(const TriangleMesh& mesh, const fs::path& path) {
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\n"
     << "element vertex " << mesh.vertices.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "element face " << mesh.triangles.size() << "\n"
     << "property list uchar int vertex_indices\nend_header\n";
  for (const Vec& v : mesh.vertices) {
    for (int a = 0; a < 3; ++a) os << (a ? " " : "") << float_text(a < v.size() ? v(a) : 0.0);
    os << '\n';
  }
  for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  write_file(path, os.str());
}

TriangleMesh import_mesh_ply(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw IoError(path.string() + ": not a PLY file");
  std::size_t nv = 0, nf = 0;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream is(line);
    std::string kw, elem;
    is >> kw;
    if (kw == "format" && line.find("ascii") == std::string::npos) {
      throw IoError(path.string() + ": only ASCII PLY is supported");
    }
    if (kw != "element") continue;
    std::size_t n = 0;
    is >> elem >> n;
    if (elem == "vertex") nv = n;
    if (elem == "face") nf = n;
  }
  if (line != "end_header") throw IoError(path.string() + ": missing end_header");
  TriangleMesh mesh;
  for (std::size_t i = 0; i < nv; ++i) {
    Vec v(3);
    if (!(in >> v(0) >> v(1) >> v(2))) throw IoError(path.string() + ": truncated vertex list");
    mesh.vertices.push_back(v);
  }
  for (std::size_t i = 0; i < nf; ++i) {
    int k = 0;
    std::array<int, 3> t{};
    if (!(in >> k >> t[0] >> t[1] >> t[2]) || k != 3) throw IoError(path.string() + ": bad face record");
    for (int idx : t) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= nv) throw IoError(path.string() + ": face index out of range");
    }
    mesh.triangles.push_back(t);
  }
  return mesh;
}

void export_polylines_ply(const Polylines& lines, const fs::path& path) {
  std::ostringstream body;
  std::size_t edges = 0;
  for (const auto& l : lines.lines) {
    const std::size_t n = l.indices.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      body << l.indices[i] << ' ' << l.indices[i + 1] << '\n';
      ++edges;
    }
    if (l.closed && n > 2) {
      body << l.indices[n - 1] << ' ' << l.indices[0] << '\n';
      ++edges;
    }
  }
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\n"
     << "element vertex " << lines.vertices.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "element edge " << edges << "\n"
     << "property int vertex1\nproperty int vertex2\nend_header\n";
  for (const Vec& v : lines.vertices) {
    os << float_text(v(0)) << ' ' << float_text(v(1)) << ' '
       << float_text(v.size() > 2 ? v(2) : 0.0) << '\n';
  }
  os << body.str();
  write_file(path, os.str());
}

void export_grid(const ScalarGrid& grid, const fs::path& path) {
  grid.validate();
  std::ostringstream os = exact_stream();
  os << "ccndf_grid\n" << "dim " << grid.dim() << "\nmin";
  for (int a = 0; a < grid.dim(); ++a) os << ' ' << grid.box.min(a);
  os << "\nmax";
  for (int a = 0; a < grid.dim(); ++a) os << ' ' << grid.box.max(a);
  os << "\nres";
  for (int r : grid.res) os << ' ' << r;
  os << "\nend_header\n";
  std::string data = os.str();
  data.reserve(data.size() + 4 * grid.values.size());
  for (double v : grid.values) put_f32(data, static_cast<float>(v));
  write_file(path, data);
}

ScalarGrid import_grid(const fs::path& path) {
  const std::string data = read_file(path);
  const std::string end = "end_header\n";
  const auto hdr_end = data.find(end);
  if (data.rfind("ccndf_grid\n", 0) != 0 || hdr_end == std::string::npos) {
    throw IoError(path.string() + ": not a grid file");
  }
  std::istringstream hs(data.substr(0, hdr_end));
  hs.imbue(std::locale::classic());
  std::string line;
  std::getline(hs, line);
  int dim = 0;
  std::vector<double> lo, hi;
  std::vector<int> res;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string key;
    ls >> key;
    if (key == "dim") {
      ls >> dim;
    } else if (key == "min" || key == "max") {
      double v = 0.0;
      auto& dst = key == "min" ? lo : hi;
      while (ls >> v) dst.push_back(v);
    } else if (key == "res") {
      int r = 0;
      while (ls >> r) res.push_back(r);
    } else {
      throw IoError(path.string() + ": unknown grid header key '" + key + "'");
    }
  }
  const auto d = static_cast<std::size_t>(dim);
  if ((dim != 2 && dim != 3) || lo.size() != d || hi.size() != d || res.size() != d) {
    throw IoError(path.string() + ": inconsistent grid header");
  }
  ScalarGrid grid;
  grid.box.min = Eigen::Map<const Eigen::VectorXd>(lo.data(), dim);
  grid.box.max = Eigen::Map<const Eigen::VectorXd>(hi.data(), dim);
  grid.res = res;
  const std::string payload = data.substr(hdr_end + end.size());
  for (int r : res) {
    if (r < 2) throw IoError(path.string() + ": grid resolution below 2");
  }
  if (payload.size() != 4 * grid.size()) throw IoError(path.string() + ": grid payload size mismatch");
  Reader rd(payload, path.string());
  grid.values.resize(grid.size());
  for (auto& v : grid.values) v = rd.f32();
  grid.validate();
  return grid;
}

}  // namespace curvndf
