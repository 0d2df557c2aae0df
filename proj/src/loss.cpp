#include "bm3/loss.hpp"

#include <algorithm>

namespace bm3 {
namespace {

void require_batch(std::size_t n) {
  if (n == 0) throw DataError("loss requires a nonempty batch");
}

void require_targets(const ForwardState& state) {
  if (!state.has_targets) throw DataError("loss requires target views; call attach_targets first");
}

const ModalityView& find_view(const ForwardState& state, const std::string& key, std::size_t& index) {
  for (std::size_t m = 0; m < state.modalities.size(); ++m) {
    if (state.modalities[m].key == key) {
      index = m;
      return state.modalities[m];
    }
  }
  throw DataError("modality '" + key + "' is not present in the forward state");
}

std::vector<Index> row_lookup(const ModalityView& view, Index num_items) {
  std::vector<Index> row_of(static_cast<std::size_t>(num_items), -1);
  for (std::size_t r = 0; r < view.items.size(); ++r) row_of[static_cast<std::size_t>(view.items[r])] = static_cast<Index>(r);
  return row_of;
}

enum class ModalityTarget { kItemId, kSelf };

double modality_loss(const ForwardState& state, std::span<const Index> batch_items,
                     std::span<const std::string> modalities, ForwardGrads* grads, Real norm_eps,
                     ModalityTarget target) {
  require_batch(batch_items.size());
  require_targets(state);
  if (modalities.empty()) throw ConfigError("multi-modal loss enabled but no modality is enabled");
  const Real scale = 1.0 / static_cast<Real>(batch_items.size());
  const Index num_items = state.item_online.rows();
  double total = 0;
  for (const auto& key : modalities) {
    std::size_t m = 0;
    const auto& view = find_view(state, key, m);
    const auto row_of = row_lookup(view, num_items);
    double sum = 0;
    for (Index item : batch_items) {
      if (item < 0 || item >= num_items) throw DataError("item index out of range in batch");
      const Index r = row_of[static_cast<std::size_t>(item)];
      if (r < 0) throw DataError("item " + std::to_string(item) + " missing from modality view " + key);
      const RowVector anchor = target == ModalityTarget::kItemId ? RowVector(state.item_target.row(item))
                                                                  : RowVector(view.target.row(r));
      auto c = neg_cosine_grad(view.online.row(r), anchor, norm_eps);
      sum += c.value;
      if (grads) grads->modality_online[m].row(r) += scale * c.grad_u;
    }
    total += sum * scale;
  }
  return total;
}

}  // namespace

double rec_loss(const ForwardState& state, std::span<const Edge> batch, ForwardGrads* grads, Real norm_eps) {
  require_batch(batch.size());
  require_targets(state);
  const Real scale = 1.0 / static_cast<Real>(batch.size());
  double sum = 0;
  for (const auto& e : batch) {
    if (e.user < 0 || e.user >= state.user_online.rows() || e.item < 0 || e.item >= state.item_online.rows())
      throw DataError("batch edge out of range");
    auto cu = neg_cosine_grad(state.user_online.row(e.user), state.item_target.row(e.item), norm_eps);
    // C is symmetric, so C(sg(target_u), online_i) = C(online_i, sg(target_u)).
    auto ci = neg_cosine_grad(state.item_online.row(e.item), state.user_target.row(e.user), norm_eps);
    sum += cu.value + ci.value;
    if (grads) {
      grads->user_online.row(e.user) += scale * cu.grad_u;
      grads->item_online.row(e.item) += scale * ci.grad_u;
    }
  }
  return sum * scale;
}

double align_loss(const ForwardState& state, std::span<const Index> batch_items,
                  std::span<const std::string> modalities, ForwardGrads* grads, Real norm_eps) {
  return modality_loss(state, batch_items, modalities, grads, norm_eps, ModalityTarget::kItemId);
}

double mask_loss(const ForwardState& state, std::span<const Index> batch_items,
                 std::span<const std::string> modalities, ForwardGrads* grads, Real norm_eps) {
  return modality_loss(state, batch_items, modalities, grads, norm_eps, ModalityTarget::kSelf);
}

double reg_loss(const ForwardState& state, std::span<const Edge> batch, double lambda, RegTarget target,
                ForwardGrads* grads) {
  require_batch(batch.size());
  if (lambda == 0) return 0;
  const Real scale = 1.0 / static_cast<Real>(batch.size());
  const Index num_users = state.user_readout.rows();
  double sum = 0;
  for (const auto& e : batch) {
    if (target == RegTarget::kReadout) {
      auto hu = state.user_readout.row(e.user);
      auto hi = state.item_readout.row(e.item);
      sum += hu.squaredNorm() + hi.squaredNorm();
      if (grads) {
        grads->user_readout.row(e.user) += (2.0 * lambda * scale) * hu;
        grads->item_readout.row(e.item) += (2.0 * lambda * scale) * hi;
      }
    } else {
      const auto& h0 = state.layer_embs.front();
      auto hu = h0.row(e.user);
      auto hi = h0.row(num_users + e.item);
      sum += hu.squaredNorm() + hi.squaredNorm();
      if (grads) {
        grads->initial.row(e.user) += (2.0 * lambda * scale) * hu;
        grads->initial.row(num_users + e.item) += (2.0 * lambda * scale) * hi;
      }
    }
  }
  return lambda * sum * scale;
}

LossBreakdown total_loss(const ForwardState& state, std::span<const Edge> batch, const LossConfig& config,
                         ForwardGrads* grads) {
  LossBreakdown out;
  out.rec = rec_loss(state, batch, grads, config.norm_eps);
  if (config.enable_align || config.enable_mask) {
    std::vector<Index> items;
    items.reserve(batch.size());
    for (const auto& e : batch) items.push_back(e.item);
    if (config.enable_align)
      out.align = align_loss(state, items, config.enabled_modalities, grads, config.norm_eps);
    if (config.enable_mask)
      out.mask = mask_loss(state, items, config.enabled_modalities, grads, config.norm_eps);
  }
  out.reg = reg_loss(state, batch, config.lambda_reg, config.reg_target, grads);
  out.total = out.rec + out.align + out.mask + out.reg;
  return out;
}

}  // namespace bm3
