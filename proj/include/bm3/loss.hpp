#pragma once

#include <span>
#include <string>
#include <vector>

#include "bm3/common.hpp"
#include "bm3/model.hpp"

namespace bm3 {

enum class RegTarget {
  kReadout,  // h_u, h_i after propagation (default)
  kInitial,  // H^0 rows
};

struct LossConfig {
  double lambda_reg = 0.0;
  std::vector<std::string> enabled_modalities;  // modality keys
  bool enable_align = true;
  bool enable_mask = true;
  RegTarget reg_target = RegTarget::kReadout;
  /// Added to every norm inside the cosine. 0 makes zero-norm inputs an error.
  Real norm_eps = 1e-12;
};

struct LossBreakdown {
  double rec = 0;
  double align = 0;
  double mask = 0;
  double reg = 0;
  double total = 0;
};

// Each loss returns its batch-mean value and, if grads is non-null, adds its
// gradient with respect to the online tensors. Target views are constants.

/// mean_k C(online_u, sg(target_i)) + C(sg(target_u), online_i)
double rec_loss(const ForwardState& state, std::span<const Edge> batch, ForwardGrads* grads, Real norm_eps = 1e-12);

/// mean_k sum_m C(online_m[i], sg(target_i))
double align_loss(const ForwardState& state, std::span<const Index> batch_items,
                  std::span<const std::string> modalities, ForwardGrads* grads, Real norm_eps = 1e-12);

/// mean_k sum_m C(online_m[i], sg(target_m[i]))
double mask_loss(const ForwardState& state, std::span<const Index> batch_items,
                 std::span<const std::string> modalities, ForwardGrads* grads, Real norm_eps = 1e-12);

/// lambda * mean_k (|h_u|^2 + |h_i|^2)
double reg_loss(const ForwardState& state, std::span<const Edge> batch, double lambda, RegTarget target,
                ForwardGrads* grads);

LossBreakdown total_loss(const ForwardState& state, std::span<const Edge> batch, const LossConfig& config,
                         ForwardGrads* grads);

}  // namespace bm3
