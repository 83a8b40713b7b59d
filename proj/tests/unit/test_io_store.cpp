#include "curvndf/io_store.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace curvndf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_floats(const fs::path& p, const std::vector<float>& v) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

}  // namespace

TEST_CASE("pose lines") {
  const Pose id = parse_pose_line("1 0 0 0 0 1 0 0 0 0 1 0");
  CHECK(id.rotation() == Mat::Identity(3, 3));
  CHECK(id.translation() == Vec::Zero(3));
  CHECK_THROWS_AS(parse_pose_line("1 0 0 0 0 1 0 0 0 0 1"), IoError);
  CHECK_THROWS_AS(parse_pose_line("2 0 0 0 0 1 0 0 0 0 1 0"), IoError);
  const Pose p = Pose::yaw3(make_point({1.5, -2, 0.25}), 0.4);
  const Pose q = parse_pose_line(format_pose_line(p));
  CHECK((q.rotation() - p.rotation()).norm() < 1e-15);
  CHECK(q.translation() == p.translation());
}

TEST_CASE("scan file record sizes") {
  TempDir dir("scan");
  const std::vector<Vec> pts{make_point({1, 2, 3}), make_point({-1, 0.5, 2})};
  write_scan_file(dir / "scan_000000.bin", pts);
  CHECK(fs::file_size(dir / "scan_000000.bin") == 24);
  const auto back = read_scan_file(dir / "scan_000000.bin", ScanFormat::Auto);
  REQUIRE(back.size() == 2);
  CHECK(back[1](1) == 0.5);

  write_floats(dir / "000000.bin", {1, 2, 3, 0.9f, 4, 5, 6, 0.1f});
  const auto kitti = read_scan_file(dir / "000000.bin", ScanFormat::Auto);
  REQUIRE(kitti.size() == 2);
  CHECK(kitti[1](2) == 6.0);

  write_floats(dir / "bad.bin", {1, 2, 3, 4, 5});
  CHECK_THROWS_AS(read_scan_file(dir / "bad.bin", ScanFormat::Xyz), IoError);
  write_floats(dir / "nan.bin", {1, 2, NAN});
  CHECK_THROWS_AS(read_scan_file(dir / "nan.bin", ScanFormat::Xyz), IoError);
}

TEST_CASE("dataset round trip and count mismatch") {
  TempDir dir("dataset");
  std::vector<Scan> scans;
  scans.push_back({Pose::planar(1, 2, 0.3), {make_point({1, 0}), make_point({0, 2})}});
  scans.push_back({Pose::planar(-1, 0, -2), {make_point({0.5, 0.5})}});
  save_scans(dir.path(), scans);
  const auto back = load_scans(dir.path(), 2);
  REQUIRE(back.size() == 2);
  CHECK(back[0].pose.dim() == 2);
  CHECK((back[0].pose.translation() - make_point({1, 2})).norm() < 1e-12);
  CHECK(back[1].pose.yaw() == doctest::Approx(-2.0));
  CHECK((back[0].points[1] - make_point({0, 2})).norm() < 1e-6);
  CHECK(load_scans(dir.path(), 3)[0].pose.dim() == 3);

  std::ofstream(dir / "poses.txt", std::ios::app) << "1 0 0 0 0 1 0 0 0 0 1 0\n";
  CHECK_THROWS_AS(load_scans(dir.path(), 2), IoError);
}

TEST_CASE("trajectory round trip") {
  TempDir dir("traj");
  const std::vector<TrajectoryPoint> t{{0, 1, 2, 0.5}, {1, 1.25, 2.5, -3.0}};
  write_trajectory(dir / "t.txt", t);
  const auto back = read_trajectory(dir / "t.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[1].theta == -3.0);
  CHECK(back[1].y == 2.5);
}

TEST_CASE("model checkpoints are bit exact") {
  TempDir dir("model");
  const NetConfig cfg;
  const FieldNet net = FieldNet::init(cfg, 12);
  const SceneTransform tf{make_point({1, 2, 3}), 0.04};
  save_model(dir / "m.bin", net, tf);
  CHECK(model_header_size(cfg) == 325);
  CHECK(fs::file_size(dir / "m.bin") == 325 + 8 * 73217);
  const ModelFile mf = load_model(dir / "m.bin");
  CHECK(std::memcmp(mf.net.parameters().data(), net.parameters().data(), 8 * net.parameter_count()) == 0);
  CHECK(mf.transform.scale == 0.04);
  CHECK(mf.net.config().encoding.frequencies == cfg.encoding.frequencies);
  CHECK(slurp(dir / "m.bin").substr(0, 6) == std::string("CCNDF\0", 6));

  std::string bytes = slurp(dir / "m.bin");
  bytes[0] = 'X';
  std::ofstream(dir / "bad.bin", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_model(dir / "bad.bin"), IoError);
  bytes[0] = 'C';
  bytes[6] = 9;  // version
  std::ofstream(dir / "ver.bin", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_model(dir / "ver.bin"), IoError);
  bytes[6] = 1;
  bytes.resize(bytes.size() - 4);
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_model(dir / "short.bin"), IoError);
}

TEST_CASE("mesh PLY header and round trip") {
  TempDir dir("ply");
  TriangleMesh cube;
  for (int i = 0; i < 8; ++i) cube.vertices.push_back(make_point({double(i & 1), double(i >> 1 & 1), double(i >> 2 & 1)}));
  const int faces[12][3] = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                            {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  for (const auto& f : faces) cube.triangles.push_back({f[0], f[1], f[2]});
  export_mesh_ply(cube, dir / "cube.ply");
  const std::string text = slurp(dir / "cube.ply");
  CHECK(text.find("element vertex 8\n") != std::string::npos);
  CHECK(text.find("element face 12\n") != std::string::npos);
  const TriangleMesh back = import_mesh_ply(dir / "cube.ply");
  CHECK(back.vertices.size() == 8);
  CHECK(back.triangles[1] == std::array<int, 3>{1, 2, 3});

  export_mesh_ply(TriangleMesh{}, dir / "empty.ply");
  const TriangleMesh empty = import_mesh_ply(dir / "empty.ply");
  CHECK(empty.vertices.empty());
  CHECK(slurp(dir / "empty.ply").find("element face 0\n") != std::string::npos);
}

TEST_CASE("grid payload and round trip") {
  TempDir dir("grid");
  ScalarGrid g;
  g.box = Aabb::cube(make_point({0, 0, 0}), 1.0);
  g.res = {4, 4, 4};
  g.values.resize(64);
  for (std::size_t i = 0; i < 64; ++i) g.values[i] = 0.25 * static_cast<double>(i);
  export_grid(g, dir / "g.grid");
  const std::string text = slurp(dir / "g.grid");
  const auto end = text.find("end_header\n");
  REQUIRE(end != std::string::npos);
  CHECK(text.size() - (end + 11) == 64 * 4);
  const ScalarGrid back = import_grid(dir / "g.grid");
  CHECK(back.res == g.res);
  CHECK(back.values == g.values);
  CHECK(back.box.max == g.box.max);
}
