// Command-line front end: scene synthesis, training, meshing, evaluation,
// localisation and the supervision-mode comparison.
//
// Exit codes: 0 on success, 2 on invalid input or configuration, 1 otherwise.

#include "curvndf/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace curvndf;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string mode;
  std::string out;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.mode.empty()) set_config_value(cfg, "train.mode", g.mode);
  if (g.threads < 1) throw ConfigError("--threads must be at least 1");
  cfg.validate();
  return cfg;
}

/// Writes to --out when given, otherwise to stdout.
void emit(const GlobalOptions& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  const fs::path p(g.out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + g.out);
  out << text;
}

void require_out(const GlobalOptions& g, const char* what) {
  if (g.out.empty()) throw ConfigError(std::string(what) + " needs --out");
}

/// Oracle-backed commands use the configured cube, centred on the origin
/// unless box.center is set.
Aabb config_box(const RunConfig& cfg, int dim) {
  Vec c = Vec::Zero(dim);
  if (cfg.box_center) {
    if (static_cast<int>(cfg.box_center->size()) != dim) throw ConfigError("box.center dimension mismatch");
    for (int a = 0; a < dim; ++a) c(a) = (*cfg.box_center)[static_cast<std::size_t>(a)];
  }
  return Aabb::cube(c, 0.5 * cfg.box_size);
}

double config_truncation_world(const RunConfig& cfg) {
  return cfg.train.targets.truncation * 0.5 * cfg.box_size;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural distance fields with curvature-constrained supervision"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed overriding the config");
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)");
  app.add_option("--mode", g.mode, "Supervision mode")->check(CLI::IsMember({"ray", "dcn", "curvature"}));
  app.add_option("--out", g.out, "Output path");

  std::string scene, trajectory, scans_dir, model, dataset, loss_csv;
  int dim = 3;
  int res = 0;
  double band = 0.0;
  bool oracle = false;

  auto* synth = app.add_subcommand("synth", "Simulate scans of an analytic scene into --out");
  synth->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
  synth->add_option("--trajectory", trajectory, "orbit:N:R[:CX:CY], sphere:N:R or a `t x y theta` file")
      ->required();

  auto* train = app.add_subcommand("train", "Train a model on a scan directory, checkpoint to --out");
  train->add_option("--scans", scans_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--dim", dim, "Spatial dimension of the scans")->check(CLI::IsMember({2, 3}));
  train->add_option("--loss-csv", loss_csv, "Per-epoch loss log (default: <out>.loss.csv)");

  auto* mesh = app.add_subcommand("mesh", "Extract the zero level set of a model as PLY");
  mesh->add_option("--model", model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  mesh->add_option("--res", res, "Cells per axis (default: mesh.resolution)");

  auto* grid = app.add_subcommand("grid", "Sample a model on a regular grid");
  grid->add_option("--model", model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  grid->add_option("--res", res, "Samples per axis (default: grid.resolution)");

  auto* eval = app.add_subcommand("eval-sdf", "Band SDF errors of a model against a scene (CSV)");
  eval->add_option("--scene", scene, "Ground-truth scene file")->required()->check(CLI::ExistingFile);
  auto* eval_model = eval->add_option("--model", model, "Model checkpoint")->check(CLI::ExistingFile);
  auto* eval_oracle = eval->add_flag("--oracle", oracle, "Evaluate the scene against itself");
  eval_model->excludes(eval_oracle);
  eval->add_option("--band", band, "Band half-width in world units (default: truncation)");

  auto* loc = app.add_subcommand("localize", "Global MCL over a 2D dataset (CSV)");
  loc->add_option("--dataset", dataset, "Dataset with trajectory.txt")->required()->check(CLI::ExistingDirectory);
  auto* loc_model = loc->add_option("--model", model, "Model checkpoint")->check(CLI::ExistingFile);
  auto* loc_scene = loc->add_option("--scene", scene, "Analytic scene used as the map")->check(CLI::ExistingFile);
  loc_model->excludes(loc_scene);

  auto* compare = app.add_subcommand("compare", "Train all supervision modes and compare (CSV)");
  compare->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
  compare->add_option("--trajectory", trajectory, "Trajectory spec, as for synth")->required();

  app.add_subcommand("config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = resolve_config(g);
    if (*synth) {
      require_out(g, "synth");
      const SynthSummary s = cmd_synth(scene, trajectory, g.out, cfg);
      std::cerr << "wrote " << s.scans << " scans, " << s.points << " points to " << g.out << '\n';
    } else if (*train) {
      require_out(g, "train");
      const fs::path csv = loss_csv.empty() ? fs::path(g.out + ".loss.csv") : fs::path(loss_csv);
      const TrainedModel m = cmd_train(cfg, scans_dir, dim, g.out, csv, g.threads, &std::cerr);
      std::cerr << "trained on " << m.rays << " rays (" << m.dropped << " outside the box)\n";
    } else if (*mesh) {
      require_out(g, "mesh");
      const MeshSummary s = cmd_mesh(model, res > 0 ? res : cfg.mesh_resolution, g.out, g.threads);
      std::cerr << "mesh: " << s.vertices << " vertices, " << s.elements << " elements\n";
    } else if (*grid) {
      require_out(g, "grid");
      ModelFile mf = load_model(model);
      const int m = mf.net.dim();
      const Aabb box = model_box(mf.transform, m);
      const NetField field(std::move(mf.net), mf.transform, g.threads);
      const int n = res > 0 ? res : cfg.grid_resolution;
      export_grid(sample_grid(field.batch(), box, std::vector<int>(static_cast<std::size_t>(m), n), g.threads), g.out);
    } else if (*eval) {
      const AnalyticScene truth = AnalyticScene::load(scene);
      if (!oracle && model.empty()) throw ConfigError("eval-sdf needs --model or --oracle");
      std::ostringstream os;
      if (oracle) {
        const OracleField field(truth);
        const double b = band > 0.0 ? band : config_truncation_world(cfg);
        write_sdf_csv(cmd_eval_sdf(field, truth, config_box(cfg, truth.dim()), b, cfg.eval_samples, cfg.seed), os);
      } else {
        ModelFile mf = load_model(model);
        if (mf.net.dim() != truth.dim()) throw ConfigError("model and scene dimensions differ");
        const Aabb box = model_box(mf.transform, truth.dim());
        const double b = band > 0.0 ? band : mf.transform.distance_to_world(cfg.train.targets.truncation);
        const NetField field(std::move(mf.net), mf.transform, g.threads);
        write_sdf_csv(cmd_eval_sdf(field, truth, box, b, cfg.eval_samples, cfg.seed), os);
      }
      emit(g, os.str());
    } else if (*loc) {
      if (model.empty() == scene.empty()) throw ConfigError("localize needs exactly one of --model or --scene");
      std::ostringstream os;
      if (!model.empty()) {
        ModelFile mf = load_model(model);
        const Aabb box = model_box(mf.transform, mf.net.dim());
        const double outside = mf.transform.distance_to_world(cfg.train.targets.truncation);
        const NetField field(std::move(mf.net), mf.transform, g.threads);
        write_localization_csv(cmd_localize(field, box, outside, dataset, cfg, g.threads), os);
      } else {
        const OracleField field(AnalyticScene::load(scene));
        write_localization_csv(cmd_localize(field, config_box(cfg, field.dim()), config_truncation_world(cfg),
                                            dataset, cfg, g.threads),
                               os);
      }
      emit(g, os.str());
    } else if (*compare) {
      const AnalyticScene s = AnalyticScene::load(scene);
      std::ostringstream os;
      write_compare_csv(cmd_compare(s, trajectory, cfg, g.threads, &std::cerr), os);
      emit(g, os.str());
    } else {
      emit(g, config_to_text(cfg));
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
