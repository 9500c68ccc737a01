#pragma once

#include "stgformer/common.hpp"

#include <iosfwd>
#include <utility>
#include <vector>

namespace stgformer {

enum class Provenance { prior, posterior };

/// Continuous socio-temporal graph embedding for one step.
///
/// `dest` holds one row per agent at step t (the edge destinations), `src`
/// one row per (agent, earlier step) pair (the edge sources). `src` rows are
/// time-major: row tau * n + j is agent j at step tau, so it is empty at
/// t = 0 and grows by n rows per step.
struct GraphEmbedding {
  int t = 0;
  Mat dest;  // n x d
  Mat src;   // (n*t) x d
  Provenance provenance = Provenance::prior;

  int agents() const { return static_cast<int>(dest.rows()); }
  int dim() const { return static_cast<int>(dest.cols()); }
  void validate() const;
};

/// Binary adjacency of the socio-temporal graph at one step: n x (n*t),
/// row = destination agent at step t, column tau*n + j = source agent j at
/// step tau < t. Edges only point forward in time, so the stacked graph over
/// all steps is acyclic by construction.
struct Adjacency {
  int n = 0;
  int t = 0;
  BitMat bits;  // n x (n*t)

  static int column(int source_agent, int source_step, int n) {
    return source_step * n + source_agent;
  }
  /// Inverse of column(): returns (source_agent, source_step).
  static std::pair<int, int> decode_column(int col, int n) { return {col % n, col / n}; }

  std::uint8_t at(int dest_agent, int source_agent, int source_step) const {
    return bits(dest_agent, column(source_agent, source_step, n));
  }
};

/// Hard threshold of the bilinear products: edge (i, c) exists iff
/// dot(dest row i, src row c) is strictly positive (exact zero maps to 0).
/// t = 0 yields a 0-column matrix.
Adjacency hard_adjacency(const GraphEmbedding& e);

/// Differentiable surrogate: sigmoid(dot / temperature), entries in (0, 1).
Mat soft_adjacency(const GraphEmbedding& e, double temperature);

long edge_count(const Adjacency& a);

/// Force an all-ones adjacency of the given shape (w/o-graph ablation).
Adjacency full_adjacency(int n, int t);

/// One serialized adjacency with its provenance coordinates. The CSV layout
/// is `window,sample,t,n,bits` where bits is the row-major 0/1 string of the
/// n x (n*t) matrix.
struct AdjacencyRecord {
  long window = 0;
  long sample = 0;
  Adjacency adj;
};

void write_adjacency_csv(std::ostream& os, const std::vector<AdjacencyRecord>& records);
std::vector<AdjacencyRecord> read_adjacency_csv(std::istream& is);

}  // namespace stgformer
