#pragma once

#include "stgformer/config.hpp"
#include "stgformer/predict.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace stgformer {

struct Metrics {
  double ade = 0.0;
  double fde = 0.0;
  long agents = 0;  // agent evaluations aggregated
};

struct AdeFdeOptions {
  /// Default: take the best sample per agent. When set, the best sample is
  /// chosen jointly for the whole scene instead.
  bool joint_scene = false;
};

/// Best-of-K displacement errors against the ground-truth future. Per agent,
/// ADE is the mean L2 displacement over the predicted steps and FDE the
/// final-step displacement; the minimum over the K samples is averaged over
/// agents. Shapes must match (samples x steps x agents).
Metrics ade_fde(const std::vector<std::vector<Mat>>& samples, const std::vector<Mat>& ground_truth,
                const AdeFdeOptions& options = {});
Metrics ade_fde(const PredictionSet& pred, const std::vector<Mat>& ground_truth,
                const AdeFdeOptions& options = {});

/// Pool per-window metrics weighted by agent count.
Metrics pool(const std::vector<Metrics>& parts);

struct MetricReport {
  int schema_version = 1;
  std::uint64_t config_hash = 0;
  int k = 0;
  long windows = 0;
  std::map<std::string, Metrics> per_scene;
  Metrics aggregate;  // mean of the per-scene values when several scenes
};

void write_metric_report(std::ostream& os, const MetricReport& report);
MetricReport read_metric_report(std::istream& is);

/// Plain-text table: one row per scene plus an AVG row.
std::string render_table(const MetricReport& report);

enum class Protocol { leave_one_scene_out, single_split };

/// The benchmark harness. For leave_one_scene_out every *.txt file directly
/// under the root is one scene; each rotation trains on all other scenes and
/// evaluates on the held-out one. For single_split the root must contain
/// train/ and test/ subdirectories.
MetricReport benchmark(const std::filesystem::path& root, Protocol protocol,
                       const RunConfig& cfg);

/// Evaluate prediction/ground-truth dumps (cmd_eval path). Ground truth must
/// cover every predicted window and step.
MetricReport evaluate_dumps(const PredictionDump& pred, const GroundTruthDump& gt,
                            const AdeFdeOptions& options = {});

/// Sanity baselines: K = 1 prediction sets in window coordinates.
PredictionSet baseline_constant_position(const TrajectoryWindow& window);
PredictionSet baseline_constant_velocity(const TrajectoryWindow& window);

}  // namespace stgformer
