// Python bindings. Point sets cross the boundary as (N, m) float64 arrays;
// internally they are column-major m x N.

#include "curvndf/commands.hpp"
#include "curvndf/encode.hpp"
#include "curvndf/mesher.hpp"
#include "curvndf/raysample.hpp"
#include "curvndf/supervise.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <numbers>
#include <sstream>

namespace py = pybind11;
using namespace curvndf;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Vec to_vec(const Eigen::VectorXd& v) {
  check_dim(static_cast<int>(v.size()));
  return Vec(v);
}

Eigen::MatrixXd columns(const RowPoints& pts) {
  if (pts.cols() != 2 && pts.cols() != 3) throw std::invalid_argument("points must have shape (N, 2) or (N, 3)");
  return pts.transpose();
}

RunConfig make_config(const std::optional<std::string>& path,
                      const std::map<std::string, std::string>& overrides) {
  RunConfig cfg = path ? load_config(*path) : RunConfig{};
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

py::dict sdf_dict(const SdfMetrics& m) {
  py::dict d;
  d["count"] = m.count;
  d["mae"] = m.mae;
  d["rmse"] = m.rmse;
  d["eikonal"] = m.eikonal;
  return d;
}

py::list history_list(const std::vector<EpochRecord>& history) {
  py::list out;
  for (const auto& r : history) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["data"] = r.mean.data;
    d["endpoint"] = r.mean.endpoint;
    d["eikonal"] = r.mean.eikonal;
    d["smoothness"] = r.mean.smoothness;
    d["total"] = r.mean.total;
    out.append(d);
  }
  return out;
}

py::tuple mesh_arrays(const TriangleMesh& mesh) {
  RowPoints v(static_cast<Eigen::Index>(mesh.vertices.size()), 3);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = mesh.vertices[i].transpose();
  Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> f(static_cast<Eigen::Index>(mesh.triangles.size()), 3);
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    for (int k = 0; k < 3; ++k) f(static_cast<Eigen::Index>(i), k) = mesh.triangles[i][static_cast<std::size_t>(k)];
  }
  return py::make_tuple(v, f);
}

NetConfig net_config(int dim, int bands, double max_frequency, double omega_first,
                     double omega_hidden, int hidden_width, int hidden_layers) {
  NetConfig cfg;
  cfg.dim = dim;
  cfg.encoding = EncodingConfig::geometric(bands, max_frequency);
  cfg.omega_first = omega_first;
  cfg.omega_hidden = omega_hidden;
  cfg.hidden_width = hidden_width;
  cfg.hidden_layers = hidden_layers;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(curvndf, m) {
  m.doc() = "Neural distance fields with curvature-constrained self-supervision";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<SceneError>(m, "SceneError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  const RunConfig defaults;

  // Encoding and sampling.
  m.def("encode",
        [](const Eigen::VectorXd& x, int bands, double max_frequency) {
          return encode(to_vec(x), EncodingConfig::geometric(bands, max_frequency));
        },
        py::arg("x"), py::arg("bands") = defaults.encoding_bands,
        py::arg("max_frequency") = defaults.encoding_max_frequency);
  m.def("encode_dyadic",
        [](const Eigen::VectorXd& x, int bands) { return encode(to_vec(x), EncodingConfig::dyadic(bands)); },
        py::arg("x"), py::arg("bands"));
  m.def("log_linear_parameters", &log_linear_parameters, py::arg("n"));
  m.def("sample_ray",
        [](const Eigen::VectorXd& origin, const Eigen::VectorXd& endpoint, int n) {
          const Ray ray = make_ray(to_vec(origin), to_vec(endpoint));
          const auto samples = sample_ray(ray, n);
          RowPoints pts(static_cast<Eigen::Index>(samples.size()), origin.size());
          std::vector<double> t, dist;
          for (std::size_t i = 0; i < samples.size(); ++i) {
            pts.row(static_cast<Eigen::Index>(i)) = samples[i].x.transpose();
            t.push_back(samples[i].t);
            dist.push_back(samples[i].ray_distance);
          }
          return py::make_tuple(pts, t, dist);
        },
        py::arg("origin"), py::arg("endpoint"), py::arg("n") = 40);

  // Supervision primitives.
  m.def("iso_curvature",
        [](const Eigen::VectorXd& g, const Eigen::MatrixXd& h, double rmin, double rmax) {
          FieldJet jet;
          jet.gradient = to_vec(g);
          jet.hessian = Mat(h);
          const IsoCurvature c = iso_curvature(jet, static_cast<int>(g.size()), rmin, rmax);
          return py::make_tuple(c.kappa, c.radius);
        },
        py::arg("gradient"), py::arg("hessian"), py::arg("min_radius") = 1e-3, py::arg("max_radius") = 1e6);
  m.def("dcn_distance",
        [](const Eigen::VectorXd& n, const Eigen::VectorXd& o, const Eigen::VectorXd& e, const Eigen::VectorXd& x) {
          return dcn_distance(to_vec(n), make_ray(to_vec(o), to_vec(e)), to_vec(x));
        },
        py::arg("normal"), py::arg("origin"), py::arg("endpoint"), py::arg("x"));
  m.def("curvature_distance",
        [](double r, const Eigen::VectorXd& o, const Eigen::VectorXd& e, const Eigen::VectorXd& x,
           const Eigen::VectorXd& n) {
          return curvature_distance(r, make_ray(to_vec(o), to_vec(e)), to_vec(x), to_vec(n));
        },
        py::arg("radius"), py::arg("origin"), py::arg("endpoint"), py::arg("x"), py::arg("normal"));
  m.def("sample_weight", &sample_weight, py::arg("d_pred_abs"), py::arg("d_max"), py::arg("gamma"));

  // Analytic scenes.
  py::class_<AnalyticScene>(m, "Scene")
      .def_static("from_text", [](const std::string& text) {
        std::istringstream is(text);
        return AnalyticScene::parse(is);
      })
      .def_static("load", [](const std::string& path) { return AnalyticScene::load(path); })
      .def_property_readonly("dim", &AnalyticScene::dim)
      .def("__len__", &AnalyticScene::size)
      .def("sdf", [](const AnalyticScene& s, const RowPoints& pts) {
        return OracleField(s).values(columns(pts));
      })
      .def("jet", [](const AnalyticScene& s, const Eigen::VectorXd& x) {
        const FieldJet j = s.jet(to_vec(x));
        return py::make_tuple(j.value, Eigen::VectorXd(j.gradient), Eigen::MatrixXd(j.hessian));
      })
      .def("to_text", [](const AnalyticScene& s) {
        std::ostringstream os;
        s.write(os);
        return os.str();
      });

  // Networks.
  py::class_<FieldNet>(m, "FieldNet")
      .def_static(
          "init",
          [](int dim, std::uint64_t seed, int bands, double max_frequency, double omega_first,
             double omega_hidden, int hidden_width, int hidden_layers) {
            return FieldNet::init(net_config(dim, bands, max_frequency, omega_first, omega_hidden,
                                             hidden_width, hidden_layers),
                                  seed);
          },
          py::arg("dim") = 3, py::arg("seed") = 0, py::arg("bands") = defaults.encoding_bands,
          py::arg("max_frequency") = defaults.encoding_max_frequency,
          py::arg("omega_first") = defaults.net.omega_first,
          py::arg("omega_hidden") = defaults.net.omega_hidden,
          py::arg("hidden_width") = defaults.net.hidden_width,
          py::arg("hidden_layers") = defaults.net.hidden_layers)
      .def_property_readonly("dim", &FieldNet::dim)
      .def_property_readonly("parameter_count", py::overload_cast<>(&FieldNet::parameter_count, py::const_))
      .def("parameters", [](const FieldNet& n) {
        const auto p = n.parameters();
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
      })
      .def("eval", [](const FieldNet& n, const RowPoints& pts) { return n.eval_batch(columns(pts)); })
      .def("jet", [](const FieldNet& n, const Eigen::VectorXd& x) {
        const FieldJet j = n.eval_jet(to_vec(x));
        return py::make_tuple(j.value, Eigen::VectorXd(j.gradient), Eigen::MatrixXd(j.hessian));
      })
      .def("save",
           [](const FieldNet& n, const std::string& path, const Eigen::VectorXd& center, double scale) {
             save_model(path, n, SceneTransform{to_vec(center), scale});
           },
           py::arg("path"), py::arg("center"), py::arg("scale"));
  m.def("load_model", [](const std::string& path) {
    ModelFile mf = load_model(path);
    return py::make_tuple(std::move(mf.net), Eigen::VectorXd(mf.transform.center), mf.transform.scale);
  });

  // Meshing.
  m.def("marching_cubes_scene",
        [](const AnalyticScene& s, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int cells) {
          const OracleField f(s);
          return mesh_arrays(marching_cubes(f.batch(), Aabb{to_vec(lo), to_vec(hi)}, cells));
        },
        py::arg("scene"), py::arg("box_min"), py::arg("box_max"), py::arg("cells"));
  m.def("read_mesh", [](const std::string& path) { return mesh_arrays(import_mesh_ply(path)); });

  // Localisation statistics.
  m.def("estimate",
        [](const RowPoints& particles, double convergence_std) {
          if (particles.cols() != 4) throw std::invalid_argument("particles must have shape (N, 4): x, y, theta, weight");
          std::vector<Particle> ps;
          for (Eigen::Index i = 0; i < particles.rows(); ++i) {
            ps.push_back({{particles(i, 0), particles(i, 1), particles(i, 2)}, particles(i, 3)});
          }
          const PoseEstimate e = estimate(ps, convergence_std);
          return py::make_tuple(e.pose.x, e.pose.y, e.pose.theta, e.std, e.converged);
        },
        py::arg("particles"), py::arg("convergence_std") = defaults.mcl.convergence_std);

  // Configuration and end-to-end commands. `overrides` maps config keys to values.
  using Overrides = std::map<std::string, std::string>;
  m.def("default_config", [] { return config_to_text(RunConfig{}); });
  m.def("config_text",
        [](std::optional<std::string> path, const Overrides& o) { return config_to_text(make_config(path, o)); },
        py::arg("config") = py::none(), py::arg("overrides") = Overrides{});
  m.def("synth",
        [](const std::string& scene, const std::string& trajectory, const std::string& out,
           std::optional<std::string> config, const Overrides& o) {
          const SynthSummary s = cmd_synth(scene, trajectory, out, make_config(config, o));
          return py::make_tuple(s.scans, s.points);
        },
        py::arg("scene"), py::arg("trajectory"), py::arg("out_dir"), py::arg("config") = py::none(),
        py::arg("overrides") = Overrides{});
  m.def("train",
        [](const std::string& scans, const std::string& out_model, int dim, std::optional<std::string> config,
           const Overrides& o, int threads) {
          const RunConfig cfg = make_config(config, o);
          std::vector<EpochRecord> history;
          {
            py::gil_scoped_release release;
            history = cmd_train(cfg, scans, dim, out_model, out_model + ".loss.csv", threads).history;
          }
          return history_list(history);
        },
        py::arg("scans_dir"), py::arg("out_model"), py::arg("dim") = 3, py::arg("config") = py::none(),
        py::arg("overrides") = Overrides{}, py::arg("threads") = 1);
  m.def("mesh",
        [](const std::string& model, int res, const std::string& out, int threads) {
          const MeshSummary s = cmd_mesh(model, res, out, threads);
          return py::make_tuple(s.vertices, s.elements);
        },
        py::arg("model"), py::arg("res"), py::arg("out_ply"), py::arg("threads") = 1);
  m.def("eval_sdf",
        [](const std::string& model, const std::string& scene, double band, std::size_t samples,
           std::uint64_t seed) {
          ModelFile mf = load_model(model);
          const AnalyticScene truth = AnalyticScene::load(scene);
          const Aabb box = model_box(mf.transform, mf.net.dim());
          const double b = band > 0.0 ? band : mf.transform.distance_to_world(RunConfig{}.train.targets.truncation);
          const NetField field(std::move(mf.net), mf.transform);
          return sdf_dict(cmd_eval_sdf(field, truth, box, b, samples, seed));
        },
        py::arg("model"), py::arg("scene"), py::arg("band") = 0.0, py::arg("samples") = 4000,
        py::arg("seed") = 0);
  m.def("compare",
        [](const std::string& scene, const std::string& trajectory, std::optional<std::string> config,
           const Overrides& o, int threads) {
          std::vector<CompareRow> rows;
          {
            py::gil_scoped_release release;
            rows = cmd_compare(AnalyticScene::load(scene), trajectory, make_config(config, o), threads);
          }
          py::list out;
          for (const auto& r : rows) {
            py::dict d = sdf_dict(r.sdf);
            d["mode"] = std::string(to_string(r.mode));
            d["mcl_rmse"] = r.mcl ? py::cast(r.mcl->rmse) : py::none();
            d["mcl_mae"] = r.mcl ? py::cast(r.mcl->mae) : py::none();
            out.append(d);
          }
          return out;
        },
        py::arg("scene"), py::arg("trajectory"), py::arg("config") = py::none(),
        py::arg("overrides") = Overrides{}, py::arg("threads") = 1);
}
