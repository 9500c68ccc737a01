#pragma once

#include "stgformer/data.hpp"
#include "stgformer/model.hpp"

#include <iosfwd>
#include <vector>

namespace stgformer {

struct PredictOptions {
  int k = 20;
  bool deterministic = false;  // zeroes both graph and position noise
  bool share_warmup = false;   // compute the posterior warm-up once for all samples
  bool sample_graphs = true;
  bool sample_positions = true;
};

/// K rollouts over the 12 future steps, with the adjacency used at each
/// predicted step.
struct PredictionSet {
  int k = 0;
  std::vector<std::vector<Mat>> samples;        // k x 12 x (n x 2), window coordinates
  std::vector<std::vector<Adjacency>> graphs;   // k x 12
  std::vector<std::uint64_t> seeds;             // per-sample substream seeds
};

/// The inference procedure: warm the graph history up with the posterior on
/// the 8 observed frames, then alternate prior_step / trajectory_step for 12
/// steps, feeding predictions back autoregressively. Samples use independent
/// substreams of `seed`; deterministic mode collapses them to one trajectory.
PredictionSet predict(const std::vector<Mat>& observed, const ModelParams& params,
                      const PredictOptions& options, std::uint64_t seed);

/// predict() on a window's observed frames.
PredictionSet predict_window(const TrajectoryWindow& window, const ModelParams& params,
                             const PredictOptions& options, std::uint64_t seed);

/// Prediction dump: `window,sample,t,agent_id,x,y` rows in denormalized
/// scene units, t running over the 12 predicted steps (8..19).
void write_predictions_csv(std::ostream& os, long window_id, const TrajectoryWindow& window,
                           const PredictionSet& pred, bool header);

/// Ground-truth dump: `window,t,agent_id,x,y` over all 20 steps.
void write_ground_truth_csv(std::ostream& os, long window_id, const TrajectoryWindow& window,
                            bool header);

struct PredictionDump {
  // window -> sample -> step-major positions; agents ordered as in the csv.
  struct Window {
    long id = 0;
    std::vector<long> agent_ids;
    std::vector<std::vector<Mat>> samples;  // k x steps x (n x 2)
    int first_step = kObservedSteps;
  };
  std::vector<Window> windows;
};
PredictionDump read_predictions_csv(std::istream& is);

struct GroundTruthDump {
  struct Window {
    long id = 0;
    std::vector<long> agent_ids;
    std::vector<Mat> frames;  // steps x (n x 2)
  };
  std::vector<Window> windows;
};
GroundTruthDump read_ground_truth_csv(std::istream& is);

}  // namespace stgformer
