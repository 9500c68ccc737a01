#pragma once

#include "stgformer/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stgformer {

enum class SceneFormat { ethucy, sdd };
enum class UnitLabel { meters, pixels };

struct AgentTrack {
  long id = 0;
  // (frame index, position), strictly increasing frames after loading.
  std::vector<std::pair<long, Vec2>> points;
};

struct Scene {
  std::string id;
  double frame_interval = 0.4;  // seconds between consecutive frame indices
  UnitLabel units = UnitLabel::meters;
  std::vector<AgentTrack> agents;
};

struct LoadOptions {
  /// Raw-frame stride collapsed to one index step. 0 = auto (gcd of frame
  /// deltas). SDD annotations are per video frame at 30 fps, so the 0.4 s
  /// protocol needs 12 there; ETH/UCY raw frames are already 0.4 s apart.
  long frame_step = 0;
  bool pedestrians_only = false;  // sdd: keep only "Pedestrian" labels
  bool include_lost = false;      // sdd: keep rows flagged lost
};

/// Parse an annotation file into a Scene. ethucy lines are
/// `frame agent_id x y`; sdd lines are
/// `agent_id xmin ymin xmax ymax frame lost occluded generated label` with
/// the position taken as the box center. Malformed lines raise ParseError
/// naming the line number; an empty scene raises ParseError.
Scene load_scene(const std::filesystem::path& path, SceneFormat format,
                 const LoadOptions& options = {});
Scene load_scene(std::istream& is, SceneFormat format, const LoadOptions& options = {},
                 const std::string& name = "<stream>");

struct WindowOptions {
  /// Divisor applied to pixel-unit scenes during normalization; meter scenes
  /// are never scaled.
  double pixels_per_unit = 1.0;
};

inline constexpr int kObservedSteps = 8;
inline constexpr int kPredictedSteps = 12;
inline constexpr int kWindowSteps = kObservedSteps + kPredictedSteps;

/// A 20-frame slice with the agents co-present through all of it,
/// normalized by translating to the first frame's centroid (and dividing by
/// pixels_per_unit for pixel scenes).
struct TrajectoryWindow {
  std::string scene_id;
  long start_frame = 0;
  std::vector<long> agent_ids;
  std::vector<Mat> observed;  // kObservedSteps entries of n x 2
  std::vector<Mat> future;    // kPredictedSteps entries of n x 2
  Vec2 origin = Vec2::Zero();
  double scale = 1.0;

  int agents() const { return static_cast<int>(agent_ids.size()); }
  std::vector<Mat> all_frames() const;
  Mat denormalize(const Mat& points) const { return points * scale + origin.transpose().replicate(points.rows(), 1); }
  Mat normalize(const Mat& points) const { return (points - origin.transpose().replicate(points.rows(), 1)) / scale; }
};

/// Slide a 20-frame window over the scene at stride-multiple start frames,
/// keeping only agents present at every frame of the window. Windows with no
/// agents are dropped. Stride must be >= 1.
std::vector<TrajectoryWindow> make_windows(const Scene& scene, int stride,
                                           const WindowOptions& options = {});

struct ScenarioSpec {
  std::string name;  // crossing | approach_diverge | parallel | random_walk
  int agents = 2;
  int frames = kWindowSteps;
  double speed = 1.0;
  double noise = 0.0;
  /// approach_diverge: the closest mutual distance, reached at meet_frame.
  double radius = 5.0;
  int meet_frame = kWindowSteps / 2;
};

/// Deterministic scripted scene for tests and desk-scale experiments.
/// approach_diverge yields two agents whose distance strictly decreases to
/// `radius` at `meet_frame`, then strictly increases.
Scene synth_scenario(const ScenarioSpec& spec, std::uint64_t seed);

void write_scene_ethucy(std::ostream& os, const Scene& scene);
void write_scene_ethucy(const std::filesystem::path& path, const Scene& scene);

}  // namespace stgformer
