#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bm3/common.hpp"
#include "bm3/data.hpp"
#include "bm3/graph.hpp"
#include "bm3/nn.hpp"

namespace bm3 {

/// Short key used in parameter and file names: visual -> "v", textual -> "t".
std::string modality_key(const std::string& modality_tag);

struct ModelParams {
  Index num_users = 0;
  Index num_items = 0;
  Index dim = 0;
  ParamTensor user_emb;  // num_users x dim
  ParamTensor item_emb;  // num_items x dim
  std::map<std::string, LinearLayer> projections;  // modality key -> d_m -> dim
  LinearLayer predictor;                           // dim -> dim, shared by every view

  /// Every trainable tensor in a fixed order.
  std::vector<ParamTensor*> all_params();
  std::vector<const ParamTensor*> all_params() const;
  /// ID embeddings, the predictor, and the projections of the listed modality keys.
  std::vector<ParamTensor*> trainable(std::span<const std::string> modality_keys);

  void zero_grad();
};

/// Xavier-initialized weights and zero biases. Each tensor draws from its own
/// seed stream, so adding or removing a modality leaves the others unchanged.
ModelParams init_model(Index num_users, Index num_items, Index dim,
                       const std::map<std::string, Index>& modality_dims, std::uint64_t seed);

/// One modality's latent views over a subset of items (row k = items[k]).
struct ModalityView {
  std::string key;
  std::vector<Index> items;
  Matrix latent;  // h_m = e_m W_m + b_m
  Matrix online;  // predictor(h_m)
  Matrix target;  // dropout(h_m), gradient-stopped
};

struct ForwardState {
  int layers = 0;
  std::vector<Matrix> layer_embs;  // H^0 .. H^L over all nodes
  Matrix user_readout;             // h_u: mean over layers
  Matrix item_readout;             // h_i: mean over layers + H^0 item rows
  Matrix user_online;              // predictor(h_u)
  Matrix item_online;
  // Target views are constants for backpropagation; no gradient is routed to them.
  Matrix user_target;
  Matrix item_target;
  std::vector<ModalityView> modalities;
  bool has_targets = false;
};

struct ForwardOptions {
  int layers = 1;
  double drop_prob = 0.0;
  DropoutMode dropout_mode = DropoutMode::kElement;
};

/// Online path only: propagation, readout, projections, predictor.
/// `modality_items`, when given, restricts modality views to those items.
ForwardState forward_online(const ModelParams& params, const NormalizedAdjacency& adj,
                            std::span<const FeatureMatrix> features, int layers,
                            const std::vector<Index>* modality_items = nullptr);

/// Draws fresh dropout masks and fills the target views. Draw order: users,
/// items, then modalities in state order.
void attach_targets(ForwardState& state, double drop_prob, Rng& rng,
                    DropoutMode mode = DropoutMode::kElement);

ForwardState forward(const ModelParams& params, const NormalizedAdjacency& adj,
                     std::span<const FeatureMatrix> features, const ForwardOptions& options, Rng& rng,
                     const std::vector<Index>* modality_items = nullptr);

/// Inner products of the user's predictor output with every item's.
Eigen::VectorXd score_all(const ForwardState& state, Index user);

/// Loss gradients with respect to the online tensors of a ForwardState.
struct ForwardGrads {
  Matrix user_online;
  Matrix item_online;
  Matrix user_readout;  // direct terms on h_u (regularization)
  Matrix item_readout;
  Matrix initial;       // direct terms on H^0 (regularization on initial embeddings)
  std::vector<Matrix> modality_online;

  static ForwardGrads zeros_like(const ForwardState& state);
};

/// Accumulates parameter gradients for the online path of `state`.
void backward(ModelParams& params, const NormalizedAdjacency& adj, std::span<const FeatureMatrix> features,
              const ForwardState& state, const ForwardGrads& grads);

}  // namespace bm3
