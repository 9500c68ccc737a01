#include "stgformer/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace stgformer::ad {

namespace {

Var make_node(Mat value, std::vector<Var> inputs, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  n->requires_grad = false;
  for (const auto& in : n->inputs)
    if (in->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->rows() != b->rows() || a->cols() != b->cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a->rows()) + "x" +
                     std::to_string(a->cols()) + " vs " + std::to_string(b->rows()) + "x" +
                     std::to_string(b->cols()));
}

}  // namespace

void Node::accumulate(const Mat& g) {
  if (!requires_grad) return;
  if (!has_grad()) grad = Mat::Zero(value.rows(), value.cols());
  grad += g;
}

Var constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

Var parameter(Mat v, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  n->name = std::move(name);
  return n;
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_node(a->value + b->value, {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_node(a->value - b->value, {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(-self.grad);
  });
}

Var scale(const Var& a, double k) {
  return make_node(a->value * k, {a},
                   [k](Node& self) { self.inputs[0]->accumulate(self.grad * k); });
}

Var matmul(const Var& a, const Var& b) {
  if (a->cols() != b->rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a->cols()) + " vs " +
                     std::to_string(b->rows()));
  return make_node(a->value * b->value, {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad * self.inputs[1]->value.transpose());
    self.inputs[1]->accumulate(self.inputs[0]->value.transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  return make_node(a->value.transpose(), {a},
                   [](Node& self) { self.inputs[0]->accumulate(self.grad.transpose()); });
}

Var relu(const Var& a) {
  return make_node(a->value.cwiseMax(0.0), {a}, [](Node& self) {
    Mat g = (self.inputs[0]->value.array() > 0.0).cast<double>() * self.grad.array();
    self.inputs[0]->accumulate(g);
  });
}

Var sigmoid(const Var& a, double temperature) {
  Mat y = (1.0 / (1.0 + (-a->value.array() / temperature).exp())).matrix();
  return make_node(std::move(y), {a}, [temperature](Node& self) {
    const auto& y = self.value.array();
    Mat g = (y * (1.0 - y) / temperature * self.grad.array()).matrix();
    self.inputs[0]->accumulate(g);
  });
}

Var add_row(const Var& x, const Var& row) {
  if (row->rows() != 1 || row->cols() != x->cols())
    throw ShapeError("add_row: bias must be 1x" + std::to_string(x->cols()));
  Mat y = x->value.rowwise() + row->value.row(0);
  return make_node(std::move(y), {x, row}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(self.grad.colwise().sum());
  });
}

Var vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("vstack: no parts");
  Eigen::Index total = 0;
  const Eigen::Index cols = parts.front()->cols();
  for (const auto& p : parts) {
    if (p->cols() != cols) throw ShapeError("vstack: column mismatch");
    total += p->rows();
  }
  Mat y(total, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleRows(at, p->rows()) = p->value;
    at += p->rows();
  }
  return make_node(std::move(y), parts, [](Node& self) {
    Eigen::Index at = 0;
    for (auto& in : self.inputs) {
      in->accumulate(self.grad.middleRows(at, in->rows()));
      at += in->rows();
    }
  });
}

Var rows(const Var& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a->rows())
    throw ShapeError("rows: slice out of range");
  return make_node(a->value.middleRows(begin, count), {a}, [begin, count](Node& self) {
    Mat g = Mat::Zero(self.inputs[0]->rows(), self.inputs[0]->cols());
    g.middleRows(begin, count) = self.grad;
    self.inputs[0]->accumulate(g);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index n = x->rows(), w = x->cols();
  if (gain->rows() != 1 || gain->cols() != w || bias->rows() != 1 || bias->cols() != w)
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(w));
  Mat xhat(n, w);
  Vec inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x->value.row(r).mean();
    const double var = (x->value.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x->value.row(r).array() - mean) * inv_std(r);
  }
  Mat y = (xhat.array().rowwise() * gain->value.row(0).array()).rowwise() +
          bias->value.row(0).array();
  return make_node(std::move(y), {x, gain, bias}, [xhat, inv_std](Node& self) {
    const Var& x = self.inputs[0];
    const Var& gain = self.inputs[1];
    const Var& bias = self.inputs[2];
    const Eigen::Index n = x->rows(), w = x->cols();
    gain->accumulate((self.grad.array() * xhat.array()).colwise().sum().matrix());
    bias->accumulate(self.grad.colwise().sum());
    Mat gx(n, w);
    for (Eigen::Index r = 0; r < n; ++r) {
      // d/dx of (x - mean) * inv_std, with inv_std depending on x.
      Eigen::RowVectorXd gy = self.grad.row(r).cwiseProduct(gain->value.row(0));
      const double gdot = gy.dot(xhat.row(r));
      const double gsum = gy.sum();
      gx.row(r) =
          inv_std(r) * (gy.array() - gsum / double(w) - xhat.row(r).array() * gdot / double(w));
    }
    x->accumulate(gx);
  });
}

Var sum(const Var& a) {
  Mat y(1, 1);
  y(0, 0) = a->value.sum();
  return make_node(std::move(y), {a}, [](Node& self) {
    self.inputs[0]->accumulate(
        Mat::Constant(self.inputs[0]->rows(), self.inputs[0]->cols(), self.grad(0, 0)));
  });
}

Var sum_squares(const Var& a) {
  Mat y(1, 1);
  y(0, 0) = a->value.squaredNorm();
  return make_node(std::move(y), {a}, [](Node& self) {
    self.inputs[0]->accumulate(2.0 * self.grad(0, 0) * self.inputs[0]->value);
  });
}

Var clip_max(const Var& x, double cap) {
  if (x->rows() != 1 || x->cols() != 1) throw ShapeError("clip_max: expects 1x1");
  Mat y(1, 1);
  y(0, 0) = std::min(x->value(0, 0), cap);
  return make_node(std::move(y), {x}, [cap](Node& self) {
    if (self.inputs[0]->value(0, 0) < cap) self.inputs[0]->accumulate(self.grad);
  });
}

Var mask(const Var& a, Mat m) {
  if (m.rows() != a->rows() || m.cols() != a->cols()) throw ShapeError("mask: shape mismatch");
  Mat y = a->value.cwiseProduct(m);
  return make_node(std::move(y), {a}, [m](Node& self) {
    self.inputs[0]->accumulate(self.grad.cwiseProduct(m));
  });
}

Var ste_gate(const Var& dots, double temperature, bool enabled) {
  Mat y = (dots->value.array() > 0.0).cast<double>().matrix();
  if (!enabled) return constant(std::move(y));
  return make_node(std::move(y), {dots}, [temperature](Node& self) {
    const auto s = (1.0 / (1.0 + (-self.inputs[0]->value.array() / temperature).exp()));
    Mat g = (s * (1.0 - s) / temperature * self.grad.array()).matrix();
    self.inputs[0]->accumulate(g);
  });
}

Var masked_softmax(const Var& logits, const Var& gate, const Mat* fallback) {
  const Eigen::Index nq = logits->rows(), nk = logits->cols();
  if (gate && (gate->rows() != nq || gate->cols() != nk))
    throw ShapeError("masked_softmax: gate shape mismatch");
  Mat p = Mat::Zero(nq, nk);
  std::vector<char> fell_back(static_cast<size_t>(nq), 0);
  for (Eigen::Index i = 0; i < nq; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    Eigen::Index kept = 0;
    for (Eigen::Index c = 0; c < nk; ++c) {
      if (gate && gate->value(i, c) == 0.0) continue;
      ++kept;
      m = std::max(m, logits->value(i, c));
    }
    if (kept == 0) {
      if (!fallback) throw ShapeError("masked_softmax: fully masked row without fallback");
      p.row(i) = fallback->row(i);
      fell_back[static_cast<size_t>(i)] = 1;
      continue;
    }
    double den = 0.0;
    for (Eigen::Index c = 0; c < nk; ++c) {
      if (gate && gate->value(i, c) == 0.0) continue;
      const double e = std::exp(logits->value(i, c) - m);
      p(i, c) = e;
      den += e;
    }
    p.row(i) /= den;
  }
  std::vector<Var> ins = gate ? std::vector<Var>{logits, gate} : std::vector<Var>{logits};
  return make_node(std::move(p), std::move(ins), [fell_back](Node& self) {
    const Var& logits = self.inputs[0];
    const Var* gate = self.inputs.size() > 1 ? &self.inputs[1] : nullptr;
    const Eigen::Index nq = self.rows(), nk = self.cols();
    Mat gl = Mat::Zero(nq, nk);
    Mat gg;
    const bool gate_grad = gate && (*gate)->requires_grad;
    if (gate_grad) gg = Mat::Zero(nq, nk);
    for (Eigen::Index i = 0; i < nq; ++i) {
      if (fell_back[static_cast<size_t>(i)]) continue;  // fixed distribution
      const double dot = self.grad.row(i).dot(self.value.row(i));
      for (Eigen::Index c = 0; c < nk; ++c) {
        const bool kept = !gate || (*gate)->value(i, c) != 0.0;
        if (kept) gl(i, c) = self.value(i, c) * (self.grad(i, c) - dot);
      }
      if (gate_grad) {
        // p as a function of the gate g: p_c = g_c e_c / sum(g e). For kept
        // entries e_c/den == p_c; for masked ones recompute e_c against the
        // kept max, clamping the exponent so the surrogate path stays finite.
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < nk; ++c)
          if ((*gate)->value(i, c) != 0.0) m = std::max(m, logits->value(i, c));
        double den = 0.0;
        for (Eigen::Index c = 0; c < nk; ++c)
          if ((*gate)->value(i, c) != 0.0) den += std::exp(logits->value(i, c) - m);
        for (Eigen::Index c = 0; c < nk; ++c) {
          const double ratio = (*gate)->value(i, c) != 0.0
                                   ? self.value(i, c)
                                   : std::exp(std::min(logits->value(i, c) - m, 0.0)) / den;
          gg(i, c) = ratio * (self.grad(i, c) - dot);
        }
      }
    }
    logits->accumulate(gl);
    if (gate_grad) (*gate)->accumulate(gg);
  });
}

void backward(const Var& root) {
  if (root->rows() != 1 || root->cols() != 1)
    throw ShapeError("backward: root must be a 1x1 scalar node");
  // Topological order by DFS over the input edges.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad = Mat::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->has_grad()) n->backprop(*n);
  }
}

}  // namespace stgformer::ad
