#pragma once

#include "stgformer/stg.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stgformer {

enum class Motion { approaching, diverging, tied };

/// approaching when the current inter-agent distance is strictly below the
/// previous one, diverging when strictly above, tied on exact equality.
Motion classify_motion(const Vec2& xi_prev, const Vec2& xj_prev, const Vec2& xi_cur,
                       const Vec2& xj_cur);

enum class PairAggregation {
  any_source_step,  // edge(i,j,t) = OR over tau of adjacency(i, (j, tau))
  latest_source_step,  // only tau = t-1 counts
};

struct EdgeEvent {
  long window = 0;
  long sample = 0;
  int agent_i = 0;  // destination
  int agent_j = 0;  // source
  int step = 0;     // the step whose bit differs from step-1
  bool zero_to_one = false;
  Motion motion = Motion::tied;
  double distance = 0.0;  // inter-agent distance at `step`
};

/// Pairwise flip events of one adjacency sequence against the aligned
/// positions. adjacency[k] and positions[k] both describe step
/// first_step + k; events exist for k >= 1 and ordered pairs i != j.
std::vector<EdgeEvent> flip_events(const std::vector<Adjacency>& adjacency,
                                   const std::vector<Mat>& positions, int first_step,
                                   PairAggregation aggregation = PairAggregation::any_source_step,
                                   long window = 0, long sample = 0);

struct Histogram {
  double bin_width = 1.0;
  double lo = 0.0;
  std::vector<long> counts;
  long total = 0;
  bool empty_input = false;  // emitted with a warning

  int bin_of(double v) const;
  void add(double v);
};

Histogram make_histogram(const std::vector<double>& values, double bin_width, double lo = 0.0);

/// Distances spanned by active edges, pair-aggregated per step.
Histogram distance_histogram(const std::vector<Adjacency>& adjacency,
                             const std::vector<Mat>& positions, double bin_width,
                             PairAggregation aggregation = PairAggregation::any_source_step);

/// Time spans t - tau of active edges (source at tau feeding step t).
Histogram span_histogram(const std::vector<Adjacency>& adjacency);

struct FlipHistograms {
  Histogram zero_to_one;
  Histogram one_to_zero;
};
FlipHistograms flip_distance_histogram(const std::vector<EdgeEvent>& events, double bin_width);

void write_histogram_csv(std::ostream& os, const Histogram& h, const std::string& label);
/// Minimal SVG bar chart so runs produce an inspectable image without a
/// plotting dependency.
void write_histogram_svg(const std::filesystem::path& path, const Histogram& h,
                         const std::string& title);
void write_flip_histograms_svg(const std::filesystem::path& path, const FlipHistograms& h,
                               const std::string& title);

/// Edge activation (0/1) against inter-agent distance for every
/// pair-aggregated edge slot; the desk-scale probe of activation locality.
struct EdgeDistanceSample {
  double distance = 0.0;
  int active = 0;
};
std::vector<EdgeDistanceSample> edge_distance_samples(
    const std::vector<Adjacency>& adjacency, const std::vector<Mat>& positions,
    PairAggregation aggregation = PairAggregation::any_source_step);

struct SpearmanResult {
  double rho = 0.0;
  double p_one_sided_negative = 1.0;  // P(rho_observed <= rho | independence)
  long n = 0;
};
/// Spearman rank correlation with average ranks for ties; the p-value uses
/// the large-sample normal approximation z = rho * sqrt(n - 1).
SpearmanResult spearman(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace stgformer
