#pragma once

#include "stgformer/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace stgformer::ad {

// Reverse-mode tape over Eigen matrices. Graphs are built by the free
// functions below; backward(root) runs one reverse sweep from a scalar root
// and accumulates into Node::grad. Parameters are long-lived leaf nodes,
// interior nodes are owned by whoever holds the root, so a graph is freed by
// dropping the root. Graph construction is the forward pass; there is no
// separate replay.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Mat value;
  Mat grad;  // allocated lazily by backward()
  bool requires_grad = false;
  std::string name;  // nonempty for parameters
  std::vector<Var> inputs;
  std::function<void(Node&)> backprop;

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  bool has_grad() const { return grad.size() == value.size() && grad.size() > 0; }
  void accumulate(const Mat& g);
  void zero_grad() { grad.resize(0, 0); }
};

Var constant(Mat v);
Var parameter(Mat v, std::string name);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var relu(const Var& a);
/// Elementwise sigmoid(x / temperature).
Var sigmoid(const Var& a, double temperature = 1.0);
/// x + broadcast row (bias addition); row must be 1 x cols.
Var add_row(const Var& x, const Var& row);
Var vstack(const std::vector<Var>& parts);
Var rows(const Var& a, Eigen::Index begin, Eigen::Index count);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);
/// Sum of all entries, as a 1x1 node.
Var sum(const Var& a);
/// Sum of squared entries, as a 1x1 node.
Var sum_squares(const Var& a);
/// min(x, cap) on a 1x1 node; gradient passes only while x < cap.
Var clip_max(const Var& x, double cap);
/// Elementwise product with a constant matrix (zero entries cut gradients).
Var mask(const Var& a, Mat m);

/// Straight-through edge gate. Forward value is the hard threshold
/// (dot > 0 -> 1, else 0). When enabled, backward treats the gate as
/// sigmoid(dot / temperature) and routes gradients into `dots`; when
/// disabled the gate is a detached constant, which keeps the whole loss
/// finite-difference checkable.
Var ste_gate(const Var& dots, double temperature, bool enabled);

/// Row-wise softmax of `logits` restricted to columns where gate == 1.
/// `gate` may be null (no masking). Rows whose gate is entirely zero take the
/// fixed distribution from the matching row of `fallback` (row-stochastic;
/// required if any row can be fully masked). Gradients flow into the logits
/// of kept entries and, through the gate's straight-through backward, into
/// the gate itself.
Var masked_softmax(const Var& logits, const Var& gate, const Mat* fallback);

/// Reverse sweep from a 1x1 root. Throws ShapeError if root is not scalar.
void backward(const Var& root);

}  // namespace stgformer::ad
