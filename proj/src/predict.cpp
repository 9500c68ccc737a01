#include "stgformer/predict.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace stgformer {

namespace {

std::vector<GraphEmbedding> posterior_warmup(const std::vector<Mat>& observed,
                                             const ModelParams& params, RandomStream& rng,
                                             bool deterministic) {
  std::vector<GraphEmbedding> graphs;
  std::vector<Mat> x_hist;
  for (const auto& frame : observed) {
    x_hist.push_back(frame);
    graphs.push_back(posterior_step(params, x_hist, graphs, rng, deterministic));
  }
  return graphs;
}

GraphEmbedding stationary_tile(const GraphEmbedding& base, int t) {
  GraphEmbedding g;
  g.t = t;
  g.dest = base.dest;
  g.src.resize(static_cast<Eigen::Index>(base.dest.rows()) * t, base.dest.cols());
  for (int tau = 0; tau < t; ++tau) g.src.middleRows(tau * base.dest.rows(), base.dest.rows()) = base.src;
  g.provenance = base.provenance;
  return g;
}

}  // namespace

PredictionSet predict(const std::vector<Mat>& observed, const ModelParams& params,
                      const PredictOptions& options, std::uint64_t seed) {
  if (static_cast<int>(observed.size()) < kObservedSteps)
    throw ShapeError("predict: need " + std::to_string(kObservedSteps) + " observed frames, got " +
                     std::to_string(observed.size()));
  if (options.k < 1) throw Error("predict: k must be >= 1");
  const AblationFlags& ab = params.config.ablation;

  PredictionSet out;
  out.k = options.k;

  const bool det_graphs = options.deterministic || !options.sample_graphs;
  const bool det_positions = options.deterministic || !options.sample_positions;

  std::vector<GraphEmbedding> shared_warmup;
  if (options.share_warmup && !ab.no_g) {
    RandomStream rng(RandomStream::substream(seed, 0));
    shared_warmup = posterior_warmup(observed, params, rng, det_graphs);
  }

  for (int s = 0; s < options.k; ++s) {
    const std::uint64_t sample_seed = RandomStream::substream(seed, static_cast<std::uint64_t>(s) + 1);
    RandomStream rng(sample_seed);
    out.seeds.push_back(sample_seed);

    std::vector<GraphEmbedding> graphs;
    if (!ab.no_g)
      graphs = options.share_warmup ? shared_warmup
                                    : posterior_warmup(observed, params, rng, det_graphs);

    std::vector<Mat> history(observed.begin(), observed.begin() + kObservedSteps);
    std::vector<Mat> steps;
    std::vector<Adjacency> step_graphs;
    for (int t = kObservedSteps; t < kWindowSteps; ++t) {
      GraphEmbedding g_t;
      if (ab.no_g) {
        // Graph modules are off; trajectory_step builds the all-ones gate
        // from any step-t embedding under this ablation.
        g_t.t = t;
        g_t.dest = Mat::Zero(history.front().rows(), params.config.d);
        g_t.src = Mat::Zero(static_cast<Eigen::Index>(history.front().rows()) * t, params.config.d);
      } else if (ab.stationary_g && t >= 2) {
        g_t = stationary_tile(graphs[1], t);
      } else {
        if (static_cast<int>(graphs.size()) != t)
          throw Error("predict: graph history has " + std::to_string(graphs.size()) +
                      " entries entering step " + std::to_string(t));
        g_t = prior_step(params, graphs, rng, det_graphs);
      }
      TrajectoryStepResult step = trajectory_step(params, history, g_t, rng, det_positions);
      history.push_back(step.next);
      steps.push_back(step.next);
      step_graphs.push_back(step.adjacency);
      if (!ab.no_g) graphs.push_back(std::move(g_t));
    }
    out.samples.push_back(std::move(steps));
    out.graphs.push_back(std::move(step_graphs));
  }
  return out;
}

PredictionSet predict_window(const TrajectoryWindow& window, const ModelParams& params,
                             const PredictOptions& options, std::uint64_t seed) {
  return predict(window.observed, params, options, seed);
}

void write_predictions_csv(std::ostream& os, long window_id, const TrajectoryWindow& window,
                           const PredictionSet& pred, bool header) {
  if (header) os << "window,sample,t,agent_id,x,y\n";
  for (int s = 0; s < pred.k; ++s)
    for (int step = 0; step < static_cast<int>(pred.samples[s].size()); ++step) {
      const Mat denorm = window.denormalize(pred.samples[s][step]);
      for (int i = 0; i < window.agents(); ++i)
        os << window_id << ',' << s << ',' << kObservedSteps + step << ','
           << window.agent_ids[i] << ',' << format_double(denorm(i, 0)) << ','
           << format_double(denorm(i, 1)) << '\n';
    }
}

void write_ground_truth_csv(std::ostream& os, long window_id, const TrajectoryWindow& window,
                            bool header) {
  if (header) os << "window,t,agent_id,x,y\n";
  const auto frames = window.all_frames();
  for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
    const Mat denorm = window.denormalize(frames[t]);
    for (int i = 0; i < window.agents(); ++i)
      os << window_id << ',' << t << ',' << window.agent_ids[i] << ','
         << format_double(denorm(i, 0)) << ',' << format_double(denorm(i, 1)) << '\n';
  }
}

namespace {

struct CsvRow {
  long window, sample, t, agent;
  double x, y;
};

std::vector<CsvRow> read_rows(std::istream& is, bool with_sample, const char* what) {
  std::vector<CsvRow> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("window,", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    CsvRow r{};
    bool ok = with_sample ? bool(ls >> r.window >> r.sample >> r.t >> r.agent >> r.x >> r.y)
                          : bool(ls >> r.window >> r.t >> r.agent >> r.x >> r.y);
    if (!ok)
      throw ParseError(std::string(what) + ": malformed line " + std::to_string(line_no));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

PredictionDump read_predictions_csv(std::istream& is) {
  PredictionDump dump;
  auto rows = read_rows(is, true, "prediction csv");
  // window -> sample -> t -> agent -> position
  std::map<long, std::map<long, std::map<long, std::map<long, Vec2>>>> tree;
  for (const auto& r : rows) tree[r.window][r.sample][r.t][r.agent] = Vec2(r.x, r.y);
  for (const auto& [wid, by_sample] : tree) {
    PredictionDump::Window w;
    w.id = wid;
    const auto& first_sample = by_sample.begin()->second;
    w.first_step = static_cast<int>(first_sample.begin()->first);
    for (const auto& [agent, pos] : first_sample.begin()->second) w.agent_ids.push_back(agent);
    for (const auto& [sid, by_t] : by_sample) {
      std::vector<Mat> steps;
      for (const auto& [t, by_agent] : by_t) {
        if (by_agent.size() != w.agent_ids.size())
          throw ParseError("prediction csv: window " + std::to_string(wid) +
                           " has inconsistent agents at t=" + std::to_string(t));
        Mat m(static_cast<Eigen::Index>(by_agent.size()), 2);
        Eigen::Index i = 0;
        for (long agent : w.agent_ids) {
          auto it = by_agent.find(agent);
          if (it == by_agent.end())
            throw ParseError("prediction csv: window " + std::to_string(wid) + " missing agent " +
                             std::to_string(agent) + " at t=" + std::to_string(t));
          m.row(i++) = it->second.transpose();
        }
        steps.push_back(std::move(m));
      }
      w.samples.push_back(std::move(steps));
    }
    dump.windows.push_back(std::move(w));
  }
  return dump;
}

GroundTruthDump read_ground_truth_csv(std::istream& is) {
  GroundTruthDump dump;
  auto rows = read_rows(is, false, "ground truth csv");
  std::map<long, std::map<long, std::map<long, Vec2>>> tree;  // window -> t -> agent
  for (const auto& r : rows) tree[r.window][r.t][r.agent] = Vec2(r.x, r.y);
  for (const auto& [wid, by_t] : tree) {
    GroundTruthDump::Window w;
    w.id = wid;
    for (const auto& [agent, pos] : by_t.begin()->second) w.agent_ids.push_back(agent);
    for (const auto& [t, by_agent] : by_t) {
      if (by_agent.size() != w.agent_ids.size())
        throw ParseError("ground truth csv: window " + std::to_string(wid) +
                         " has inconsistent agents at t=" + std::to_string(t));
      Mat m(static_cast<Eigen::Index>(by_agent.size()), 2);
      Eigen::Index i = 0;
      for (long agent : w.agent_ids) {
        auto it = by_agent.find(agent);
        if (it == by_agent.end())
          throw ParseError("ground truth csv: window " + std::to_string(wid) + " missing agent " +
                           std::to_string(agent));
        m.row(i++) = it->second.transpose();
      }
      w.frames.push_back(std::move(m));
    }
    dump.windows.push_back(std::move(w));
  }
  return dump;
}

}  // namespace stgformer
