#pragma once

// Layer kernels used by the text classifier, each with its exact backward rule.
// Vectors are column matrices (n x 1).

#include <cstddef>
#include <vector>

#include "noisecnn/matrix.hpp"
#include "noisecnn/rng.hpp"

namespace noisecnn::ops {

inline constexpr double kProbFloor = 1e-12;

/// y = W x + b.
Matrix affine(const Matrix& x, const Matrix& W, const Matrix& b);

struct AffineGrads {
  Matrix dx;
  Matrix dW;
  Matrix db;
};
AffineGrads affine_backward(const Matrix& x, const Matrix& W, const Matrix& dy);

/// Convolution along the time axis of a d x T input. `filters` is F x (w*d);
/// column k*d + c of a filter row weighs channel c at offset k. Output is
/// F x (T - w + 1).
Matrix temporal_convolution(const Matrix& X, const Matrix& filters, const Matrix& bias,
                            std::size_t window);

struct ConvGrads {
  Matrix dX;
  Matrix dfilters;
  Matrix dbias;
};
ConvGrads temporal_convolution_backward(const Matrix& X, const Matrix& filters,
                                        std::size_t window, const Matrix& dY);

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& x, const Matrix& dy);

struct MaxPool {
  Matrix values;                    // F x 1
  std::vector<std::size_t> argmax;  // lowest index on ties
};
MaxPool max_over_time(const Matrix& featuremap);
Matrix max_over_time_backward(const MaxPool& pool, std::size_t length, const Matrix& dy);

/// Inverted dropout. In evaluation mode the input is returned unchanged and no
/// random numbers are consumed.
struct Dropout {
  Matrix output;
  Matrix scale;  // per-entry multiplier (0 or 1/keep); empty in evaluation mode
};
Dropout dropout(const Matrix& x, double keep, Rng* rng, bool train);
Matrix dropout_backward(const Dropout& d, const Matrix& dy);

/// Max-shifted softmax over all entries.
Matrix softmax(const Matrix& v);
Matrix softmax_backward(const Matrix& y, const Matrix& dy);

/// -log(max(p[label], 1e-12)).
double cross_entropy(const Matrix& p, std::size_t label);
Matrix cross_entropy_backward(const Matrix& p, std::size_t label);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace noisecnn::ops
