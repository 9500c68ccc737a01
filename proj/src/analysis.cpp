#include "stgformer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace stgformer {

Motion classify_motion(const Vec2& xi_prev, const Vec2& xj_prev, const Vec2& xi_cur,
                       const Vec2& xj_cur) {
  const double prev = (xi_prev - xj_prev).norm();
  const double cur = (xi_cur - xj_cur).norm();
  if (cur < prev) return Motion::approaching;
  if (cur > prev) return Motion::diverging;
  return Motion::tied;
}

namespace {

bool pair_edge(const Adjacency& adj, int i, int j, PairAggregation aggregation) {
  if (adj.t == 0) return false;
  if (aggregation == PairAggregation::latest_source_step) return adj.at(i, j, adj.t - 1) != 0;
  for (int tau = 0; tau < adj.t; ++tau)
    if (adj.at(i, j, tau)) return true;
  return false;
}

void check_alignment(const std::vector<Adjacency>& adjacency, const std::vector<Mat>& positions) {
  if (adjacency.size() != positions.size())
    throw ShapeError("adjacency covers " + std::to_string(adjacency.size()) +
                     " steps, positions " + std::to_string(positions.size()));
  for (size_t k = 0; k < adjacency.size(); ++k)
    if (adjacency[k].n != positions[k].rows())
      throw ShapeError("agent count mismatch at sequence index " + std::to_string(k));
}

}  // namespace

std::vector<EdgeEvent> flip_events(const std::vector<Adjacency>& adjacency,
                                   const std::vector<Mat>& positions, int first_step,
                                   PairAggregation aggregation, long window, long sample) {
  check_alignment(adjacency, positions);
  std::vector<EdgeEvent> events;
  for (size_t k = 1; k < adjacency.size(); ++k) {
    const int n = adjacency[k].n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const bool prev = pair_edge(adjacency[k - 1], i, j, aggregation);
        const bool cur = pair_edge(adjacency[k], i, j, aggregation);
        if (prev == cur) continue;
        EdgeEvent e;
        e.window = window;
        e.sample = sample;
        e.agent_i = i;
        e.agent_j = j;
        e.step = first_step + static_cast<int>(k);
        e.zero_to_one = cur;
        e.motion = classify_motion(positions[k - 1].row(i), positions[k - 1].row(j),
                                   positions[k].row(i), positions[k].row(j));
        e.distance = (positions[k].row(i) - positions[k].row(j)).norm();
        events.push_back(e);
      }
  }
  return events;
}

int Histogram::bin_of(double v) const {
  const int b = static_cast<int>(std::floor((v - lo) / bin_width));
  return std::max(b, 0);
}

void Histogram::add(double v) {
  const int b = bin_of(v);
  if (b >= static_cast<int>(counts.size())) counts.resize(b + 1, 0);
  ++counts[b];
  ++total;
}

Histogram make_histogram(const std::vector<double>& values, double bin_width, double lo) {
  if (bin_width <= 0) throw Error("histogram: bin width must be positive");
  Histogram h;
  h.bin_width = bin_width;
  h.lo = lo;
  if (values.empty()) {
    h.empty_input = true;
    std::cerr << "warning: histogram over empty input\n";
    return h;
  }
  for (double v : values) h.add(v);
  return h;
}

Histogram distance_histogram(const std::vector<Adjacency>& adjacency,
                             const std::vector<Mat>& positions, double bin_width,
                             PairAggregation aggregation) {
  check_alignment(adjacency, positions);
  std::vector<double> distances;
  for (size_t k = 0; k < adjacency.size(); ++k) {
    const int n = adjacency[k].n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && pair_edge(adjacency[k], i, j, aggregation))
          distances.push_back((positions[k].row(i) - positions[k].row(j)).norm());
  }
  return make_histogram(distances, bin_width);
}

Histogram span_histogram(const std::vector<Adjacency>& adjacency) {
  std::vector<double> spans;
  for (const auto& adj : adjacency)
    for (int i = 0; i < adj.n; ++i)
      for (int tau = 0; tau < adj.t; ++tau)
        for (int j = 0; j < adj.n; ++j)
          if (adj.at(i, j, tau)) spans.push_back(adj.t - tau);
  return make_histogram(spans, 1.0);
}

FlipHistograms flip_distance_histogram(const std::vector<EdgeEvent>& events, double bin_width) {
  std::vector<double> up, down;
  for (const auto& e : events) (e.zero_to_one ? up : down).push_back(e.distance);
  FlipHistograms h;
  h.zero_to_one = make_histogram(up, bin_width);
  h.one_to_zero = make_histogram(down, bin_width);
  return h;
}

void write_histogram_csv(std::ostream& os, const Histogram& h, const std::string& label) {
  os << "bin_lo,bin_hi,count,label\n";
  for (size_t b = 0; b < h.counts.size(); ++b)
    os << format_double(h.lo + b * h.bin_width) << ',' << format_double(h.lo + (b + 1) * h.bin_width)
       << ',' << h.counts[b] << ',' << label << '\n';
}

namespace {

void svg_bars(std::ostream& os, const Histogram& h, double x0, double y0, double width,
              double height, const char* fill) {
  if (h.counts.empty()) return;
  const long peak = *std::max_element(h.counts.begin(), h.counts.end());
  if (peak == 0) return;
  const double bw = width / static_cast<double>(h.counts.size());
  for (size_t b = 0; b < h.counts.size(); ++b) {
    const double bh = height * static_cast<double>(h.counts[b]) / static_cast<double>(peak);
    os << " <rect x=\"" << x0 + b * bw << "\" y=\"" << y0 + height - bh << "\" width=\""
       << bw * 0.9 << "\" height=\"" << bh << "\" fill=\"" << fill << "\"/>\n";
  }
}

void svg_open(std::ostream& os, const std::string& title, int w, int hgt) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << hgt
     << "\">\n <text x=\"10\" y=\"18\" font-size=\"14\">" << title << "</text>\n";
}

}  // namespace

void write_histogram_svg(const std::filesystem::path& path, const Histogram& h,
                         const std::string& title) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  svg_open(os, title, 640, 360);
  svg_bars(os, h, 40, 40, 560, 280, "#4878cf");
  os << "</svg>\n";
}

void write_flip_histograms_svg(const std::filesystem::path& path, const FlipHistograms& h,
                               const std::string& title) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  svg_open(os, title + " (blue: 0->1, red: 1->0)", 640, 360);
  svg_bars(os, h.zero_to_one, 40, 40, 560, 280, "#4878cf");
  svg_bars(os, h.one_to_zero, 40, 40, 560, 280, "#d1022f");
  os << "</svg>\n";
}

std::vector<EdgeDistanceSample> edge_distance_samples(const std::vector<Adjacency>& adjacency,
                                                      const std::vector<Mat>& positions,
                                                      PairAggregation aggregation) {
  check_alignment(adjacency, positions);
  std::vector<EdgeDistanceSample> out;
  for (size_t k = 0; k < adjacency.size(); ++k) {
    const int n = adjacency[k].n;
    if (adjacency[k].t == 0) continue;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        EdgeDistanceSample s;
        s.distance = (positions[k].row(i) - positions[k].row(j)).norm();
        s.active = pair_edge(adjacency[k], i, j, aggregation) ? 1 : 0;
        out.push_back(s);
      }
  }
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = 0.5 * (i + j) + 1.0;  // average rank of the tie group
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

SpearmanResult spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ShapeError("spearman: size mismatch");
  SpearmanResult r;
  r.n = static_cast<long>(xs.size());
  if (r.n < 3) return r;
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double mean = (r.n + 1) / 2.0;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (long i = 0; i < r.n; ++i) {
    num += (rx[i] - mean) * (ry[i] - mean);
    dx += (rx[i] - mean) * (rx[i] - mean);
    dy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (dx == 0.0 || dy == 0.0) return r;  // a constant input has no ranking
  r.rho = num / std::sqrt(dx * dy);
  r.p_one_sided_negative = normal_cdf(r.rho * std::sqrt(double(r.n - 1)));
  return r;
}

}  // namespace stgformer
