#include "bm3/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bm3 {

ParamTensor::ParamTensor(std::string name_, Matrix init)
    : name(std::move(name_)),
      value(std::move(init)),
      grad(Matrix::Zero(value.rows(), value.cols())),
      adam_m(Matrix::Zero(value.rows(), value.cols())),
      adam_v(Matrix::Zero(value.rows(), value.cols())) {}

Matrix xavier_init(Index rows, Index cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw ConfigError("xavier_init requires positive dimensions");
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = a * (2.0 * rng.uniform() - 1.0);
  return m;
}

LinearLayer::LinearLayer(const std::string& name, Index in_dim, Index out_dim, std::uint64_t seed)
    : weight(name + "_W", xavier_init(in_dim, out_dim, derive_seed(seed, name + "_W"))),
      bias(name + "_b", Matrix::Zero(1, out_dim)) {}

Matrix LinearLayer::apply(const Matrix& x) const {
  if (x.cols() != in_dim())
    throw DataError("linear layer " + weight.name + ": input has " + std::to_string(x.cols()) +
                    " columns, expected " + std::to_string(in_dim()));
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

void LinearLayer::accumulate(const Matrix& x, const Matrix& dy) {
  if (x.rows() != dy.rows() || x.cols() != in_dim() || dy.cols() != out_dim())
    throw DataError("linear layer " + weight.name + ": backward shape mismatch");
  weight.grad.noalias() += x.transpose() * dy;
  bias.grad.row(0) += dy.colwise().sum();
}

Matrix LinearLayer::backward(const Matrix& x, const Matrix& dy) {
  accumulate(x, dy);
  return dy * weight.value.transpose();
}

Matrix DropoutMask::apply(const Matrix& x) const {
  if (p == 0.0) return x;
  return x.cwiseProduct(mask) * keep_scale;
}

DropoutMask make_dropout_mask(Index rows, Index cols, double p, Rng& rng, DropoutMode mode) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must be in [0, 1)");
  DropoutMask m;
  m.p = p;
  m.keep_scale = 1.0 / (1.0 - p);
  m.mask = Matrix::Ones(rows, cols);
  if (p == 0.0) return m;
  for (Index r = 0; r < rows; ++r) {
    if (mode == DropoutMode::kRow) {
      if (rng.uniform() < p) m.mask.row(r).setZero();
      continue;
    }
    for (Index c = 0; c < cols; ++c)
      if (rng.uniform() < p) m.mask(r, c) = 0.0;
  }
  return m;
}

namespace {

void check_norms(Real nu, Real nv, Real norm_eps) {
  if (norm_eps == 0 && (nu == 0 || nv == 0))
    throw NumericError("negative cosine of a zero-norm vector (degenerate embedding)");
}

}  // namespace

Real neg_cosine(const RowVector& u, const RowVector& v, Real norm_eps) {
  const Real nu = u.norm(), nv = v.norm();
  check_norms(nu, nv, norm_eps);
  return -u.dot(v) / ((nu + norm_eps) * (nv + norm_eps));
}

CosineResult neg_cosine_grad(const RowVector& u, const RowVector& v, Real norm_eps) {
  const Real nu = u.norm(), nv = v.norm();
  check_norms(nu, nv, norm_eps);
  const Real s = u.dot(v);
  const Real denom = (nu + norm_eps) * (nv + norm_eps);
  CosineResult out;
  out.value = -s / denom;
  out.grad_u = -v / denom;
  if (nu > 0) out.grad_u += (s * (nv + norm_eps) / (nu * denom * denom)) * u;
  return out;
}

void adam_step(std::span<ParamTensor* const> params, AdamState& state) {
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (ParamTensor* p : params) {
    p->adam_m = state.beta1 * p->adam_m + (1.0 - state.beta1) * p->grad;
    p->adam_v = state.beta2 * p->adam_v + (1.0 - state.beta2) * p->grad.cwiseAbs2();
    if (state.lr != 0.0) {
      p->value.array() -= state.lr * (p->adam_m.array() / bc1) /
                          ((p->adam_v.array() / bc2).sqrt() + state.epsilon);
    }
    p->zero_grad();
  }
}

GradCheckResult finite_difference_check(const std::function<double()>& loss_fn,
                                        std::span<ParamTensor* const> params,
                                        const GradCheckOptions& options) {
  GradCheckResult result;
  Rng rng(options.seed);
  for (ParamTensor* p : params) {
    const auto n = static_cast<std::size_t>(p->value.size());
    std::vector<Index> coords(n);
    std::iota(coords.begin(), coords.end(), Index{0});
    if (n > options.max_coords_per_param) {
      rng.shuffle(coords);
      coords.resize(options.max_coords_per_param);
    }
    for (Index idx : coords) {
      Real& x = p->value.data()[idx];
      const Real saved = x;
      x = saved + options.eps;
      const double up = loss_fn();
      x = saved - options.eps;
      const double down = loss_fn();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double analytic = p->grad.data()[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coords_checked;
      if (result.worst_index < 0 || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p->name;
        result.worst_index = idx;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace bm3
