#include "noisecnn/tape.hpp"

#include <stdexcept>

namespace noisecnn {

Var GradTape::input(const Matrix& value, Matrix* grad_sink) {
  Node n;
  n.ref = &value;
  n.sink = grad_sink;
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var GradTape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var GradTape::record(Matrix value, Backprop backprop) {
  Node n;
  n.owned = std::move(value);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

const Matrix& GradTape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.ref ? *n.ref : n.owned;
}

void GradTape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void GradTape::backward(Var out, double seed) {
  if (value(out).size() != 1) throw std::invalid_argument("GradTape::backward: output must be scalar");
  for (auto& n : nodes_) n.grad = Matrix();
  nodes_[out.id].grad = Matrix(1, 1, seed);
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backprop) {
      // Copy: the callback may grow other nodes' gradients but never this one.
      const Matrix g = n.grad;
      n.backprop(*this, g);
    } else if (n.sink != nullptr) {
      *n.sink += n.grad;
    }
  }
}

namespace tape {

Var gather_columns(GradTape& g, const Matrix& table, Matrix* table_grad,
                   std::span<const std::size_t> indices) {
  const std::size_t d = table.cols();
  Matrix X(d, indices.size());
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (indices[t] >= table.rows()) throw std::out_of_range("gather_columns: index out of range");
    const auto r = table.row(indices[t]);
    for (std::size_t c = 0; c < d; ++c) X(c, t) = r[c];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return g.record(std::move(X), [table_grad, idx = std::move(idx), d](GradTape&, const Matrix& dX) {
    if (table_grad == nullptr) return;
    for (std::size_t t = 0; t < idx.size(); ++t) {
      auto r = table_grad->row(idx[t]);
      for (std::size_t c = 0; c < d; ++c) r[c] += dX(c, t);
    }
  });
}

Var affine(GradTape& g, Var x, Var W, Var b) {
  Matrix y = ops::affine(g.value(x), g.value(W), g.value(b));
  return g.record(std::move(y), [x, W, b](GradTape& t, const Matrix& dy) {
    auto grads = ops::affine_backward(t.value(x), t.value(W), dy);
    t.accumulate(x, grads.dx);
    t.accumulate(W, grads.dW);
    t.accumulate(b, grads.db);
  });
}

Var matvec(GradTape& g, Var A, Var x) {
  const Matrix& a = g.value(A);
  Matrix y = ops::affine(g.value(x), a, Matrix(a.rows(), 1));
  return g.record(std::move(y), [A, x](GradTape& t, const Matrix& dy) {
    auto grads = ops::affine_backward(t.value(x), t.value(A), dy);
    t.accumulate(x, grads.dx);
    t.accumulate(A, grads.dW);
  });
}

Var temporal_convolution(GradTape& g, Var X, Var filters, Var bias, std::size_t window) {
  Matrix y = ops::temporal_convolution(g.value(X), g.value(filters), g.value(bias), window);
  return g.record(std::move(y), [X, filters, bias, window](GradTape& t, const Matrix& dy) {
    auto grads = ops::temporal_convolution_backward(t.value(X), t.value(filters), window, dy);
    t.accumulate(X, grads.dX);
    t.accumulate(filters, grads.dfilters);
    t.accumulate(bias, grads.dbias);
  });
}

Var relu(GradTape& g, Var x) {
  return g.record(ops::relu(g.value(x)), [x](GradTape& t, const Matrix& dy) {
    t.accumulate(x, ops::relu_backward(t.value(x), dy));
  });
}

Var max_over_time(GradTape& g, Var featuremap) {
  auto pool = ops::max_over_time(g.value(featuremap));
  Matrix values = pool.values;
  const std::size_t length = g.value(featuremap).cols();
  return g.record(std::move(values),
                  [featuremap, pool = std::move(pool), length](GradTape& t, const Matrix& dy) {
                    t.accumulate(featuremap, ops::max_over_time_backward(pool, length, dy));
                  });
}

Var concat_rows(GradTape& g, std::span<const Var> parts) {
  std::size_t rows = 0;
  for (Var p : parts) {
    if (g.value(p).cols() != 1) throw std::invalid_argument("concat_rows: parts must be vectors");
    rows += g.value(p).rows();
  }
  Matrix y(rows, 1);
  std::size_t off = 0;
  for (Var p : parts) {
    for (double v : g.value(p).data()) y[off++] = v;
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return g.record(std::move(y), [ps = std::move(ps)](GradTape& t, const Matrix& dy) {
    std::size_t o = 0;
    for (Var p : ps) {
      Matrix part(t.value(p).rows(), 1);
      for (std::size_t i = 0; i < part.rows(); ++i) part[i] = dy[o++];
      t.accumulate(p, part);
    }
  });
}

Var dropout(GradTape& g, Var x, double keep, Rng* rng, bool train) {
  auto d = ops::dropout(g.value(x), keep, rng, train);
  Matrix out = d.output;
  return g.record(std::move(out), [x, d = std::move(d)](GradTape& t, const Matrix& dy) {
    t.accumulate(x, ops::dropout_backward(d, dy));
  });
}

Var softmax(GradTape& g, Var v) {
  Matrix y = ops::softmax(g.value(v));
  Matrix cached = y;
  return g.record(std::move(y), [v, cached = std::move(cached)](GradTape& t, const Matrix& dy) {
    t.accumulate(v, ops::softmax_backward(cached, dy));
  });
}

Var cross_entropy(GradTape& g, Var p, std::size_t label) {
  const double loss = ops::cross_entropy(g.value(p), label);
  return g.record(Matrix(1, 1, loss), [p, label](GradTape& t, const Matrix& dy) {
    Matrix dp = ops::cross_entropy_backward(t.value(p), label);
    dp *= dy[0];
    t.accumulate(p, dp);
  });
}

}  // namespace tape

}  // namespace noisecnn
