#include "stgformer/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace stgformer {

using nlohmann::json;

Metrics ade_fde(const std::vector<std::vector<Mat>>& samples, const std::vector<Mat>& ground_truth,
                const AdeFdeOptions& options) {
  if (samples.empty()) throw ShapeError("ade_fde: no samples");
  const size_t steps = ground_truth.size();
  if (steps == 0) throw ShapeError("ade_fde: empty ground truth");
  const Eigen::Index n = ground_truth.front().rows();
  for (const auto& sample : samples) {
    if (sample.size() != steps)
      throw ShapeError("ade_fde: sample covers " + std::to_string(sample.size()) +
                       " steps, ground truth " + std::to_string(steps));
    for (size_t t = 0; t < steps; ++t)
      if (sample[t].rows() != n || ground_truth[t].rows() != n)
        throw ShapeError("ade_fde: agent count mismatch at step " + std::to_string(t));
  }

  // Per-sample per-agent displacement summaries.
  const size_t k = samples.size();
  Mat ade_sa(k, n), fde_sa(k, n);
  for (size_t s = 0; s < k; ++s)
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (size_t t = 0; t < steps; ++t)
        acc += (samples[s][t].row(i) - ground_truth[t].row(i)).norm();
      ade_sa(s, i) = acc / double(steps);
      fde_sa(s, i) = (samples[s].back().row(i) - ground_truth.back().row(i)).norm();
    }

  Metrics m;
  m.agents = n;
  if (options.joint_scene) {
    Eigen::Index best = 0;
    ade_sa.rowwise().mean().minCoeff(&best);
    m.ade = ade_sa.row(best).mean();
    m.fde = fde_sa.row(best).mean();
  } else {
    m.ade = ade_sa.colwise().minCoeff().mean();
    m.fde = fde_sa.colwise().minCoeff().mean();
  }
  return m;
}

Metrics ade_fde(const PredictionSet& pred, const std::vector<Mat>& ground_truth,
                const AdeFdeOptions& options) {
  return ade_fde(pred.samples, ground_truth, options);
}

Metrics pool(const std::vector<Metrics>& parts) {
  Metrics out;
  for (const auto& p : parts) {
    out.ade += p.ade * p.agents;
    out.fde += p.fde * p.agents;
    out.agents += p.agents;
  }
  if (out.agents > 0) {
    out.ade /= out.agents;
    out.fde /= out.agents;
  }
  return out;
}

void write_metric_report(std::ostream& os, const MetricReport& report) {
  json scenes = json::object();
  for (const auto& [name, m] : report.per_scene)
    scenes[name] = {{"ade", m.ade}, {"fde", m.fde}, {"agents", m.agents}};
  json j = {{"schema_version", report.schema_version},
            {"config_hash", report.config_hash},
            {"k", report.k},
            {"windows", report.windows},
            {"per_scene", scenes},
            {"aggregate",
             {{"ade", report.aggregate.ade},
              {"fde", report.aggregate.fde},
              {"agents", report.aggregate.agents}}}};
  os << j.dump(2) << '\n';
}

MetricReport read_metric_report(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("metric report: ") + e.what());
  }
  MetricReport r;
  r.schema_version = j.value("schema_version", 1);
  r.config_hash = j.value("config_hash", std::uint64_t{0});
  r.k = j.value("k", 0);
  r.windows = j.value("windows", 0L);
  for (const auto& [name, m] : j.at("per_scene").items())
    r.per_scene[name] = Metrics{m.at("ade").get<double>(), m.at("fde").get<double>(),
                                m.value("agents", 0L)};
  r.aggregate = Metrics{j.at("aggregate").at("ade").get<double>(),
                        j.at("aggregate").at("fde").get<double>(),
                        j.at("aggregate").value("agents", 0L)};
  return r;
}

std::string render_table(const MetricReport& report) {
  std::ostringstream os;
  auto row = [&](const std::string& name, const Metrics& m) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-16s %8.4f / %-8.4f\n", name.c_str(), m.ade, m.fde);
    os << buf;
  };
  os << "scene                 ADE / FDE (best-of-" << report.k << ")\n";
  for (const auto& [name, m] : report.per_scene) row(name, m);
  row("AVG", report.aggregate);
  return os.str();
}

namespace {

std::vector<Mat> denormalized_future(const TrajectoryWindow& w) {
  std::vector<Mat> out;
  for (const auto& f : w.future) out.push_back(w.denormalize(f));
  return out;
}

std::vector<std::vector<Mat>> denormalized_samples(const TrajectoryWindow& w,
                                                   const PredictionSet& pred) {
  std::vector<std::vector<Mat>> out;
  for (const auto& sample : pred.samples) {
    std::vector<Mat> steps;
    for (const auto& s : sample) steps.push_back(w.denormalize(s));
    out.push_back(std::move(steps));
  }
  return out;
}

struct SceneWindows {
  std::string name;
  std::vector<TrajectoryWindow> windows;
};

std::vector<SceneWindows> load_scene_dir(const std::filesystem::path& dir, const RunConfig& cfg) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) throw IoError("missing scene directory " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no scene files (*.txt) under " + dir.string());

  LoadOptions lo;
  lo.frame_step = cfg.dataset.frame_step;
  lo.pedestrians_only = cfg.dataset.pedestrians_only;
  WindowOptions wo;
  wo.pixels_per_unit = cfg.dataset.pixels_per_unit;

  std::vector<SceneWindows> out;
  for (const auto& f : files) {
    SceneWindows sw;
    sw.name = f.stem().string();
    sw.windows = make_windows(load_scene(f, cfg.format(), lo), cfg.dataset.stride, wo);
    out.push_back(std::move(sw));
  }
  return out;
}

Metrics evaluate_scene(const std::vector<TrajectoryWindow>& windows, const ModelParams& params,
                       const RunConfig& cfg, std::uint64_t seed) {
  PredictOptions po;
  po.k = cfg.k;
  po.deterministic = cfg.deterministic;
  po.share_warmup = cfg.share_warmup;
  std::vector<Metrics> parts;
  for (size_t i = 0; i < windows.size(); ++i) {
    PredictionSet pred = predict_window(windows[i], params, po, RandomStream::substream(seed, i));
    parts.push_back(ade_fde(denormalized_samples(windows[i], pred), denormalized_future(windows[i])));
  }
  return pool(parts);
}

}  // namespace

MetricReport benchmark(const std::filesystem::path& root, Protocol protocol,
                       const RunConfig& cfg) {
  MetricReport report;
  report.config_hash = cfg.hash();
  report.k = cfg.k;

  if (protocol == Protocol::leave_one_scene_out) {
    auto scenes = load_scene_dir(root, cfg);
    if (scenes.size() < 2) throw Error("leave-one-scene-out needs at least two scene files");
    for (size_t held = 0; held < scenes.size(); ++held) {
      std::vector<TrajectoryWindow> train_set;
      for (size_t s = 0; s < scenes.size(); ++s)
        if (s != held)
          train_set.insert(train_set.end(), scenes[s].windows.begin(), scenes[s].windows.end());
      if (train_set.empty() || scenes[held].windows.empty())
        throw Error("scene rotation '" + scenes[held].name + "' has an empty split");
      TrainResult trained = train(train_set, cfg.train);
      report.per_scene[scenes[held].name] =
          evaluate_scene(scenes[held].windows, trained.params, cfg, cfg.train.seed);
      report.windows += static_cast<long>(scenes[held].windows.size());
    }
  } else {
    auto train_scenes = load_scene_dir(root / "train", cfg);
    auto test_scenes = load_scene_dir(root / "test", cfg);
    std::vector<TrajectoryWindow> train_set;
    for (auto& s : train_scenes)
      train_set.insert(train_set.end(), s.windows.begin(), s.windows.end());
    if (train_set.empty()) throw Error("single_split: no training windows");
    TrainResult trained = train(train_set, cfg.train);
    for (auto& s : test_scenes) {
      report.per_scene[s.name] = evaluate_scene(s.windows, trained.params, cfg, cfg.train.seed);
      report.windows += static_cast<long>(s.windows.size());
    }
  }

  // AVG row: mean of the per-scene values, the convention of the benchmark
  // tables this report mirrors.
  Metrics avg;
  for (const auto& [name, m] : report.per_scene) {
    avg.ade += m.ade;
    avg.fde += m.fde;
    avg.agents += m.agents;
  }
  const double count = std::max<size_t>(report.per_scene.size(), 1);
  avg.ade /= count;
  avg.fde /= count;
  report.aggregate = avg;
  return report;
}

MetricReport evaluate_dumps(const PredictionDump& pred, const GroundTruthDump& gt,
                            const AdeFdeOptions& options) {
  MetricReport report;
  std::vector<Metrics> parts;
  for (const auto& w : pred.windows) {
    const GroundTruthDump::Window* match = nullptr;
    for (const auto& g : gt.windows)
      if (g.id == w.id) {
        match = &g;
        break;
      }
    if (!match) throw ShapeError("no ground truth for window " + std::to_string(w.id));
    if (match->agent_ids != w.agent_ids)
      throw ShapeError("agent sets differ for window " + std::to_string(w.id));
    const size_t steps = w.samples.front().size();
    if (match->frames.size() < w.first_step + steps)
      throw ShapeError("ground truth too short for window " + std::to_string(w.id));
    std::vector<Mat> future(match->frames.begin() + w.first_step,
                            match->frames.begin() + w.first_step + steps);
    parts.push_back(ade_fde(w.samples, future, options));
    report.k = std::max(report.k, static_cast<int>(w.samples.size()));
  }
  report.windows = static_cast<long>(pred.windows.size());
  report.per_scene["all"] = pool(parts);
  report.aggregate = report.per_scene["all"];
  return report;
}

PredictionSet baseline_constant_position(const TrajectoryWindow& window) {
  PredictionSet out;
  out.k = 1;
  out.samples.emplace_back(kPredictedSteps, window.observed.back());
  out.graphs.emplace_back();
  out.seeds.push_back(0);
  return out;
}

PredictionSet baseline_constant_velocity(const TrajectoryWindow& window) {
  PredictionSet out;
  out.k = 1;
  const Mat& last = window.observed.back();
  const Mat vel = last - window.observed[window.observed.size() - 2];
  std::vector<Mat> steps;
  for (int t = 1; t <= kPredictedSteps; ++t) steps.push_back(last + t * vel);
  out.samples.push_back(std::move(steps));
  out.graphs.emplace_back();
  out.seeds.push_back(0);
  return out;
}

}  // namespace stgformer
