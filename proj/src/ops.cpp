#include "noisecnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace noisecnn::ops {

namespace {

void require_vector(const Matrix& v, const char* what) {
  if (v.cols() != 1) throw std::invalid_argument(std::string(what) + ": expected a column vector");
}

void require_nonempty(const Matrix& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

Matrix affine(const Matrix& x, const Matrix& W, const Matrix& b) {
  require_vector(x, "affine");
  require_vector(b, "affine");
  if (W.cols() != x.rows() || W.rows() != b.rows()) {
    throw std::invalid_argument("affine: dimension mismatch W " + shape_str(W) + ", x " +
                                shape_str(x) + ", b " + shape_str(b));
  }
  Matrix y = b;
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const auto w = W.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * x[j];
    y[i] += acc;
  }
  return y;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& W, const Matrix& dy) {
  AffineGrads g{Matrix(x.rows(), 1), Matrix(W.rows(), W.cols()), dy};
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const double gi = dy[i];
    if (gi == 0.0) continue;
    const auto w = W.row(i);
    auto dw = g.dW.row(i);
    for (std::size_t j = 0; j < w.size(); ++j) {
      dw[j] = gi * x[j];
      g.dx[j] += gi * w[j];
    }
  }
  return g;
}

Matrix temporal_convolution(const Matrix& X, const Matrix& filters, const Matrix& bias,
                            std::size_t window) {
  const std::size_t d = X.rows();
  const std::size_t T = X.cols();
  if (window == 0 || T < window) {
    throw std::invalid_argument("temporal_convolution: sequence length " + std::to_string(T) +
                                " shorter than window " + std::to_string(window));
  }
  if (filters.cols() != window * d || bias.rows() != filters.rows() || bias.cols() != 1) {
    throw std::invalid_argument("temporal_convolution: filter bank " + shape_str(filters) +
                                " does not fit window " + std::to_string(window) + " over d=" +
                                std::to_string(d));
  }
  const std::size_t F = filters.rows();
  const std::size_t L = T - window + 1;
  Matrix Y(F, L);
  for (std::size_t f = 0; f < F; ++f) {
    const auto w = filters.row(f);
    for (std::size_t t = 0; t < L; ++t) {
      double acc = bias[f];
      for (std::size_t k = 0; k < window; ++k)
        for (std::size_t c = 0; c < d; ++c) acc += w[k * d + c] * X(c, t + k);
      Y(f, t) = acc;
    }
  }
  return Y;
}

ConvGrads temporal_convolution_backward(const Matrix& X, const Matrix& filters,
                                        std::size_t window, const Matrix& dY) {
  const std::size_t d = X.rows();
  const std::size_t F = filters.rows();
  const std::size_t L = dY.cols();
  ConvGrads g{Matrix(d, X.cols()), Matrix(F, filters.cols()), Matrix(F, 1)};
  for (std::size_t f = 0; f < F; ++f) {
    const auto w = filters.row(f);
    auto dw = g.dfilters.row(f);
    for (std::size_t t = 0; t < L; ++t) {
      const double gy = dY(f, t);
      if (gy == 0.0) continue;
      g.dbias[f] += gy;
      for (std::size_t k = 0; k < window; ++k) {
        for (std::size_t c = 0; c < d; ++c) {
          dw[k * d + c] += gy * X(c, t + k);
          g.dX(c, t + k) += gy * w[k * d + c];
        }
      }
    }
  }
  return g;
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(x[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

MaxPool max_over_time(const Matrix& featuremap) {
  require_nonempty(featuremap, "max_over_time");
  MaxPool pool{Matrix(featuremap.rows(), 1), std::vector<std::size_t>(featuremap.rows())};
  for (std::size_t f = 0; f < featuremap.rows(); ++f) {
    const std::size_t best = argmax(featuremap.row(f));
    pool.argmax[f] = best;
    pool.values[f] = featuremap(f, best);
  }
  return pool;
}

Matrix max_over_time_backward(const MaxPool& pool, std::size_t length, const Matrix& dy) {
  Matrix dx(pool.argmax.size(), length);
  for (std::size_t f = 0; f < pool.argmax.size(); ++f) dx(f, pool.argmax[f]) = dy[f];
  return dx;
}

Dropout dropout(const Matrix& x, double keep, Rng* rng, bool train) {
  require_nonempty(x, "dropout");
  if (!(keep > 0.0 && keep <= 1.0)) {
    throw std::invalid_argument("dropout: keep probability must lie in (0, 1]");
  }
  if (!train || keep == 1.0) return {x, Matrix()};
  if (rng == nullptr) throw std::invalid_argument("dropout: training mode needs an RNG stream");
  Dropout d{x, Matrix(x.rows(), x.cols())};
  const double inv = 1.0 / keep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d.scale[i] = rng->bernoulli(keep) ? inv : 0.0;
    d.output[i] = x[i] * d.scale[i];
  }
  return d;
}

Matrix dropout_backward(const Dropout& d, const Matrix& dy) {
  if (d.scale.empty()) return dy;
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= d.scale[i];
  return dx;
}

Matrix softmax(const Matrix& v) {
  require_nonempty(v, "softmax");
  if (!v.all_finite()) throw std::invalid_argument("softmax: non-finite input");
  const double mx = *std::max_element(v.data().begin(), v.data().end());
  Matrix y(v.rows(), v.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    y[i] = std::exp(v[i] - mx);
    sum += y[i];
  }
  for (auto& e : y.data()) e /= sum;
  return y;
}

Matrix softmax_backward(const Matrix& y, const Matrix& dy) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
  return dx;
}

double cross_entropy(const Matrix& p, std::size_t label) {
  require_nonempty(p, "cross_entropy");
  if (label >= p.size()) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(p.size()) + " classes");
  }
  return -std::log(std::max(p[label], kProbFloor));
}

Matrix cross_entropy_backward(const Matrix& p, std::size_t label) {
  if (label >= p.size()) throw std::invalid_argument("cross_entropy_backward: label out of range");
  Matrix g(p.rows(), p.cols());
  if (p[label] > kProbFloor) g[label] = -1.0 / p[label];
  return g;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace noisecnn::ops
