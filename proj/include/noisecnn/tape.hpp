#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "noisecnn/matrix.hpp"
#include "noisecnn/ops.hpp"

namespace noisecnn {

/// Handle to a value recorded on a GradTape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode recording of coarse primitive operations. Values are cached
/// during the forward pass; backward() replays the records in exact reverse
/// order and adds each input's gradient into its optional sink.
class GradTape {
 public:
  using Backprop = std::function<void(GradTape&, const Matrix& out_grad)>;

  /// Records an input that is referenced, not copied. `value` must outlive the
  /// tape. If `grad_sink` is set, backward() adds this input's gradient to it.
  Var input(const Matrix& value, Matrix* grad_sink = nullptr);
  Var constant(Matrix value);
  Var record(Matrix value, Backprop backprop);

  const Matrix& value(Var v) const;
  /// Gradient accumulated during the last backward(); empty if none reached v.
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }

  /// Adds g into v's gradient. Only meaningful inside a Backprop callback.
  void accumulate(Var v, const Matrix& g);

  /// Seeds d(out)/d(out) = seed (out must be 1x1) and propagates.
  void backward(Var out, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix* sink = nullptr;
    Matrix grad;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

/// Differentiable wrappers around ops:: kernels.
namespace tape {

/// Columns of the result are rows `indices[t]` of `table` (so d x T). The
/// table gradient is scattered straight into `table_grad` rows, if given.
Var gather_columns(GradTape& g, const Matrix& table, Matrix* table_grad,
                   std::span<const std::size_t> indices);
Var affine(GradTape& g, Var x, Var W, Var b);
Var matvec(GradTape& g, Var A, Var x);
Var temporal_convolution(GradTape& g, Var X, Var filters, Var bias, std::size_t window);
Var relu(GradTape& g, Var x);
Var max_over_time(GradTape& g, Var featuremap);
Var concat_rows(GradTape& g, std::span<const Var> parts);
Var dropout(GradTape& g, Var x, double keep, Rng* rng, bool train);
Var softmax(GradTape& g, Var v);
Var cross_entropy(GradTape& g, Var p, std::size_t label);

}  // namespace tape

}  // namespace noisecnn
