#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bm3/common.hpp"

namespace bm3 {

/// Trainable tensor with its gradient accumulator and Adam moments.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  ParamTensor() = default;
  ParamTensor(std::string name, Matrix init);

  void zero_grad() { grad.setZero(); }
};

/// Entries i.i.d. uniform on [-a, a] with a = sqrt(6 / (rows + cols)).
Matrix xavier_init(Index rows, Index cols, std::uint64_t seed);

/// Affine map Y = X W + b with W: in_dim x out_dim and b: 1 x out_dim.
struct LinearLayer {
  ParamTensor weight;
  ParamTensor bias;

  LinearLayer() = default;
  LinearLayer(const std::string& name, Index in_dim, Index out_dim, std::uint64_t seed);

  Index in_dim() const { return weight.value.rows(); }
  Index out_dim() const { return weight.value.cols(); }

  Matrix apply(const Matrix& x) const;

  /// Accumulates dW += X^T dY and db += colsum(dY); returns dX = dY W^T.
  Matrix backward(const Matrix& x, const Matrix& dy);

  /// Same as backward but does not form dX.
  void accumulate(const Matrix& x, const Matrix& dy);
};

/// Inverted-dropout mask; p is the drop probability.
struct DropoutMask {
  double p = 0.0;
  double keep_scale = 1.0;
  Matrix mask;  // entries in {0, 1}

  Matrix apply(const Matrix& x) const;
};

enum class DropoutMode {
  kElement,  // independent draw per entry
  kRow,      // one draw per row, whole-row masks
};

DropoutMask make_dropout_mask(Index rows, Index cols, double p, Rng& rng,
                              DropoutMode mode = DropoutMode::kElement);

/// C(u, v) = -u.v / (|u| |v|) and its gradient with respect to u.
struct CosineResult {
  Real value = 0;
  RowVector grad_u;
};

/// With norm_eps == 0 a zero-norm input throws NumericError; otherwise norm_eps
/// is added to each norm and the gradient is that of the guarded expression.
Real neg_cosine(const RowVector& u, const RowVector& v, Real norm_eps = 0);
CosineResult neg_cosine_grad(const RowVector& u, const RowVector& v, Real norm_eps = 0);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
};

/// One bias-corrected Adam update over params, then zeroes their gradients.
void adam_step(std::span<ParamTensor* const> params, AdamState& state);

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_param;
  Index worst_index = -1;
  double analytic = 0;
  double numeric = 0;
  std::size_t coords_checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Coordinates checked per tensor; tensors at or below this size are checked fully.
  std::size_t max_coords_per_param = 64;
  /// Floor for the relative-error denominator max(|analytic|, |numeric|, floor).
  double abs_floor = 1e-7;
  std::uint64_t seed = 7;
};

/// Compares each param's populated grad against central differences of loss_fn.
/// loss_fn must be deterministic and read the current param values.
GradCheckResult finite_difference_check(const std::function<double()>& loss_fn,
                                        std::span<ParamTensor* const> params,
                                        const GradCheckOptions& options = {});

}  // namespace bm3
