// Python bindings for the main pipeline operations: scripted scenes, window
// extraction, adjacency maps, training, prediction and metrics.

#include "stgformer/eval.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace stgformer;

namespace {

struct Model {
  ModelParams params;
};

GraphEmbedding embedding_from(const Mat& dest, const Mat& src) {
  GraphEmbedding e;
  e.dest = dest;
  e.src = src;
  e.t = dest.rows() > 0 ? static_cast<int>(src.rows() / dest.rows()) : 0;
  return e;
}

TrainConfig train_config_from_kwargs(const py::kwargs& kwargs) {
  TrainConfig cfg;
  for (auto item : kwargs) {
    const std::string key = py::str(item.first);
    auto value = item.second;
    if (key == "epochs") cfg.epochs = value.cast<int>();
    else if (key == "lr") cfg.lr = value.cast<double>();
    else if (key == "weight_decay") cfg.weight_decay = value.cast<double>();
    else if (key == "kl_clip") cfg.kl_clip = value.cast<double>();
    else if (key == "zeta") cfg.zeta = value.cast<double>();
    else if (key == "grad_clip") cfg.grad_clip = value.cast<double>();
    else if (key == "seed") cfg.seed = value.cast<std::uint64_t>();
    else if (key == "straight_through") cfg.straight_through = value.cast<bool>();
    else if (key == "d") cfg.model.d = value.cast<int>();
    else if (key == "w") cfg.model.w = value.cast<int>();
    else if (key == "heads") cfg.model.heads = value.cast<int>();
    else if (key == "ff") cfg.model.ff = value.cast<int>();
    else if (key == "traj_blocks") cfg.model.traj_blocks = value.cast<int>();
    else if (key == "graph_blocks") cfg.model.graph_blocks = value.cast<int>();
    else if (key == "ablation") apply_ablation(cfg.model.ablation, value.cast<std::string>());
    else throw ConfigError({"unknown train option '" + key + "'"});
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_stgformer, m) {
  m.doc() = "Socio-temporal graph trajectory forecasting";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  py::class_<Scene>(m, "Scene")
      .def_readonly("id", &Scene::id)
      .def_property_readonly("agent_count",
                             [](const Scene& s) { return s.agents.size(); })
      .def("agent_ids",
           [](const Scene& s) {
             std::vector<long> ids;
             for (const auto& a : s.agents) ids.push_back(a.id);
             return ids;
           })
      .def("track", [](const Scene& s, size_t index) {
        std::vector<std::pair<long, Vec2>> pts = s.agents.at(index).points;
        Mat out(pts.size(), 3);
        for (size_t i = 0; i < pts.size(); ++i)
          out.row(i) << double(pts[i].first), pts[i].second.x(), pts[i].second.y();
        return out;
      });

  py::class_<TrajectoryWindow>(m, "TrajectoryWindow")
      .def_readonly("scene_id", &TrajectoryWindow::scene_id)
      .def_readonly("agent_ids", &TrajectoryWindow::agent_ids)
      .def_readonly("observed", &TrajectoryWindow::observed)
      .def_readonly("future", &TrajectoryWindow::future)
      .def_readonly("scale", &TrajectoryWindow::scale)
      .def_property_readonly("origin",
                             [](const TrajectoryWindow& w) { return Vec2(w.origin); })
      .def("denormalize", &TrajectoryWindow::denormalize);

  m.def(
      "synth_scenario",
      [](const std::string& name, int agents, int frames, double speed, double noise,
         double radius, int meet_frame, std::uint64_t seed) {
        ScenarioSpec spec{name, agents, frames, speed, noise, radius, meet_frame};
        return synth_scenario(spec, seed);
      },
      py::arg("name"), py::arg("agents") = 2, py::arg("frames") = kWindowSteps,
      py::arg("speed") = 1.0, py::arg("noise") = 0.0, py::arg("radius") = 5.0,
      py::arg("meet_frame") = kWindowSteps / 2, py::arg("seed") = 0);

  m.def(
      "load_scene",
      [](const std::filesystem::path& path, const std::string& format, long frame_step,
         bool pedestrians_only) {
        LoadOptions opts;
        opts.frame_step = frame_step;
        opts.pedestrians_only = pedestrians_only;
        const SceneFormat fmt = format == "sdd" ? SceneFormat::sdd : SceneFormat::ethucy;
        if (format != "sdd" && format != "ethucy")
          throw ConfigError({"format must be 'ethucy' or 'sdd'"});
        return load_scene(path, fmt, opts);
      },
      py::arg("path"), py::arg("format") = "ethucy", py::arg("frame_step") = 0,
      py::arg("pedestrians_only") = false);

  m.def(
      "write_scene",
      [](const std::filesystem::path& path, const Scene& scene) {
        write_scene_ethucy(path, scene);
      },
      py::arg("path"), py::arg("scene"));

  m.def(
      "make_windows",
      [](const Scene& scene, int stride, double pixels_per_unit) {
        WindowOptions opts;
        opts.pixels_per_unit = pixels_per_unit;
        return make_windows(scene, stride, opts);
      },
      py::arg("scene"), py::arg("stride") = 1, py::arg("pixels_per_unit") = 1.0);

  m.def(
      "hard_adjacency",
      [](const Mat& dest, const Mat& src) {
        return hard_adjacency(embedding_from(dest, src)).bits.cast<int>().eval();
      },
      py::arg("dest"), py::arg("src"),
      "Binary adjacency: entry (i, tau*n + j) is 1 iff dot(dest_i, src_(j,tau)) > 0");

  m.def(
      "soft_adjacency",
      [](const Mat& dest, const Mat& src, double temperature) {
        return soft_adjacency(embedding_from(dest, src), temperature);
      },
      py::arg("dest"), py::arg("src"), py::arg("temperature") = 1.0);

  py::class_<Model>(m, "Model")
      .def_property_readonly("d", [](const Model& m) { return m.params.config.d; })
      .def_property_readonly("w", [](const Model& m) { return m.params.config.w; })
      .def("save",
           [](const Model& m, const std::filesystem::path& path) {
             save_checkpoint(m.params, path);
           })
      .def(
          "predict",
          [](const Model& m, const TrajectoryWindow& window, int k, bool deterministic,
             std::uint64_t seed) {
            PredictOptions opts;
            opts.k = k;
            opts.deterministic = deterministic;
            PredictionSet pred = predict_window(window, m.params, opts, seed);
            py::list graphs;
            for (const auto& sample : pred.graphs) {
              py::list per_step;
              for (const auto& adj : sample) per_step.append(adj.bits.cast<int>().eval());
              graphs.append(per_step);
            }
            return py::make_tuple(pred.samples, graphs);
          },
          py::arg("window"), py::arg("k") = 20, py::arg("deterministic") = false,
          py::arg("seed") = 0,
          "Returns (samples, graphs): samples[k][t] is an (n, 2) array over the "
          "12 predicted steps, graphs[k][t] the adjacency used at that step.")
      .def("window_loss", [](const Model& m, const TrajectoryWindow& window,
                             std::uint64_t seed) {
        TrainConfig cfg;
        cfg.model = m.params.config;
        RandomStream rng(seed);
        LossBreakdown b = window_loss(window, m.params, cfg, rng);
        py::dict out;
        out["mse"] = b.mse;
        out["kl"] = b.kl;
        out["sparsity"] = b.sparsity;
        out["total"] = b.total;
        out["edge_density"] = b.edge_density();
        return out;
      });

  m.def("load_model", [](const std::filesystem::path& path) {
    return Model{load_checkpoint(path)};
  });

  m.def(
      "train",
      [](const std::vector<TrajectoryWindow>& windows, const py::kwargs& kwargs) {
        TrainConfig cfg = train_config_from_kwargs(kwargs);
        TrainResult result = train(windows, cfg);
        py::list log;
        for (const auto& e : result.log) {
          py::dict row;
          row["epoch"] = e.epoch;
          row["l_mse"] = e.mse;
          row["l_kl"] = e.kl;
          row["l_sparsity"] = e.sparsity;
          row["edge_density"] = e.edge_density;
          log.append(row);
        }
        return py::make_tuple(Model{std::move(result.params)}, log);
      },
      py::arg("windows"),
      "Train on a window list; keyword options mirror the JSON config "
      "(epochs, lr, zeta, seed, d, w, heads, ablation, ...). Returns "
      "(model, metrics_log).");

  m.def(
      "ade_fde",
      [](const std::vector<std::vector<Mat>>& samples, const std::vector<Mat>& ground_truth,
         bool joint_scene) {
        AdeFdeOptions opts;
        opts.joint_scene = joint_scene;
        Metrics metrics = ade_fde(samples, ground_truth, opts);
        return py::make_tuple(metrics.ade, metrics.fde);
      },
      py::arg("samples"), py::arg("ground_truth"), py::arg("joint_scene") = false,
      "Best-of-K displacement errors; samples[k][t] and ground_truth[t] are "
      "(n, 2) arrays.");

  m.attr("OBSERVED_STEPS") = kObservedSteps;
  m.attr("PREDICTED_STEPS") = kPredictedSteps;
  m.attr("WINDOW_STEPS") = kWindowSteps;
}
