#include "bm3/model.hpp"

#include <cmath>
#include <numeric>

namespace bm3 {
namespace {

Matrix gather_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

std::vector<Index> nonzero_rows(const Matrix& m) {
  std::vector<Index> rows;
  for (Index r = 0; r < m.rows(); ++r)
    if (!m.row(r).isZero(0)) rows.push_back(r);
  return rows;
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what + " (training diverged?)");
}

}  // namespace

std::string modality_key(const std::string& modality_tag) {
  if (modality_tag == "visual") return "v";
  if (modality_tag == "textual") return "t";
  return modality_tag;
}

std::vector<ParamTensor*> ModelParams::all_params() {
  std::vector<ParamTensor*> out{&user_emb, &item_emb};
  for (auto& [key, layer] : projections) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&predictor.weight);
  out.push_back(&predictor.bias);
  return out;
}

std::vector<const ParamTensor*> ModelParams::all_params() const {
  auto mut = const_cast<ModelParams*>(this)->all_params();
  return {mut.begin(), mut.end()};
}

std::vector<ParamTensor*> ModelParams::trainable(std::span<const std::string> modality_keys) {
  std::vector<ParamTensor*> out{&user_emb, &item_emb};
  for (const auto& key : modality_keys) {
    auto& layer = projections.at(key);
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&predictor.weight);
  out.push_back(&predictor.bias);
  return out;
}

void ModelParams::zero_grad() {
  for (auto* p : all_params()) p->zero_grad();
}

ModelParams init_model(Index num_users, Index num_items, Index dim,
                       const std::map<std::string, Index>& modality_dims, std::uint64_t seed) {
  ModelParams params;
  params.num_users = num_users;
  params.num_items = num_items;
  params.dim = dim;
  params.user_emb = ParamTensor("user_emb", xavier_init(num_users, dim, derive_seed(seed, "user_emb")));
  params.item_emb = ParamTensor("item_emb", xavier_init(num_items, dim, derive_seed(seed, "item_emb")));
  for (const auto& [key, feature_dim] : modality_dims)
    params.projections.emplace(key, LinearLayer("proj_" + key, feature_dim, dim, seed));
  params.predictor = LinearLayer("pred", dim, dim, seed);
  return params;
}

ForwardState forward_online(const ModelParams& params, const NormalizedAdjacency& adj,
                            std::span<const FeatureMatrix> features, int layers,
                            const std::vector<Index>* modality_items) {
  if (layers < 1) throw ConfigError("number of propagation layers must be >= 1");
  if (adj.num_users != params.num_users || adj.num_items != params.num_items)
    throw DataError("graph and model disagree on user/item counts");

  ForwardState s;
  s.layers = layers;
  Matrix h0(adj.num_nodes(), params.dim);
  h0.topRows(params.num_users) = params.user_emb.value;
  h0.bottomRows(params.num_items) = params.item_emb.value;
  s.layer_embs.push_back(std::move(h0));
  for (int l = 0; l < layers; ++l) s.layer_embs.push_back(propagate(adj, s.layer_embs.back()));

  Matrix mean = s.layer_embs[0];
  for (int l = 1; l <= layers; ++l) mean += s.layer_embs[l];
  mean /= static_cast<Real>(layers + 1);
  s.user_readout = mean.topRows(params.num_users);
  s.item_readout = mean.bottomRows(params.num_items) + params.item_emb.value;
  check_finite(s.item_readout, "item readout");
  check_finite(s.user_readout, "user readout");

  s.user_online = params.predictor.apply(s.user_readout);
  s.item_online = params.predictor.apply(s.item_readout);

  for (const auto& f : features) {
    if (f.rows() != params.num_items)
      throw DataError("feature matrix '" + f.modality_tag + "' has " + std::to_string(f.rows()) +
                      " rows, expected " + std::to_string(params.num_items));
    ModalityView view;
    view.key = modality_key(f.modality_tag);
    auto it = params.projections.find(view.key);
    if (it == params.projections.end()) throw DataError("model has no projection for modality " + view.key);
    if (modality_items) {
      view.items = *modality_items;
      view.latent = it->second.apply(gather_rows(f.data, view.items));
    } else {
      view.items.resize(static_cast<std::size_t>(params.num_items));
      std::iota(view.items.begin(), view.items.end(), Index{0});
      view.latent = it->second.apply(f.data);
    }
    view.online = params.predictor.apply(view.latent);
    check_finite(view.online, "modality latent");
    s.modalities.push_back(std::move(view));
  }
  return s;
}

void attach_targets(ForwardState& state, double drop_prob, Rng& rng, DropoutMode mode) {
  auto perturb = [&](const Matrix& h) {
    return make_dropout_mask(h.rows(), h.cols(), drop_prob, rng, mode).apply(h);
  };
  state.user_target = perturb(state.user_readout);
  state.item_target = perturb(state.item_readout);
  for (auto& view : state.modalities) view.target = perturb(view.latent);
  state.has_targets = true;
}

ForwardState forward(const ModelParams& params, const NormalizedAdjacency& adj,
                     std::span<const FeatureMatrix> features, const ForwardOptions& options, Rng& rng,
                     const std::vector<Index>* modality_items) {
  ForwardState s = forward_online(params, adj, features, options.layers, modality_items);
  attach_targets(s, options.drop_prob, rng, options.dropout_mode);
  return s;
}

Eigen::VectorXd score_all(const ForwardState& state, Index user) {
  if (user < 0 || user >= state.user_online.rows())
    throw DataError("user index " + std::to_string(user) + " out of range");
  return state.item_online * state.user_online.row(user).transpose();
}

ForwardGrads ForwardGrads::zeros_like(const ForwardState& state) {
  ForwardGrads g;
  g.user_online = Matrix::Zero(state.user_online.rows(), state.user_online.cols());
  g.item_online = Matrix::Zero(state.item_online.rows(), state.item_online.cols());
  g.user_readout = Matrix::Zero(state.user_readout.rows(), state.user_readout.cols());
  g.item_readout = Matrix::Zero(state.item_readout.rows(), state.item_readout.cols());
  g.initial = Matrix::Zero(state.layer_embs.front().rows(), state.layer_embs.front().cols());
  for (const auto& view : state.modalities) g.modality_online.push_back(Matrix::Zero(view.online.rows(), view.online.cols()));
  return g;
}

void backward(ModelParams& params, const NormalizedAdjacency& adj, std::span<const FeatureMatrix> features,
              const ForwardState& state, const ForwardGrads& grads) {
  Matrix d_user = grads.user_readout;
  Matrix d_item = grads.item_readout;

  // Predictor on ID views; only rows touched by the loss carry gradient.
  auto predictor_back = [&](const Matrix& readout, const Matrix& d_online, Matrix& d_readout) {
    auto rows = nonzero_rows(d_online);
    if (rows.empty()) return;
    Matrix dx = params.predictor.backward(gather_rows(readout, rows), gather_rows(d_online, rows));
    for (std::size_t k = 0; k < rows.size(); ++k) d_readout.row(rows[k]) += dx.row(static_cast<Index>(k));
  };
  predictor_back(state.user_readout, grads.user_online, d_user);
  predictor_back(state.item_readout, grads.item_online, d_item);

  if (grads.modality_online.size() != state.modalities.size() || features.size() != state.modalities.size())
    throw DataError("backward: modality count mismatch");
  for (std::size_t m = 0; m < state.modalities.size(); ++m) {
    const auto& view = state.modalities[m];
    if (modality_key(features[m].modality_tag) != view.key) throw DataError("backward: modality order mismatch");
    auto rows = nonzero_rows(grads.modality_online[m]);
    if (rows.empty()) continue;
    Matrix d_latent = params.predictor.backward(gather_rows(view.latent, rows), gather_rows(grads.modality_online[m], rows));
    std::vector<Index> items;
    items.reserve(rows.size());
    for (Index r : rows) items.push_back(view.items[static_cast<std::size_t>(r)]);
    params.projections.at(view.key).accumulate(gather_rows(features[m].data, items), d_latent);
  }

  // Readout is the layer mean; A is symmetric so the adjoint of propagation is propagation.
  Matrix d_mean(adj.num_nodes(), params.dim);
  d_mean.topRows(params.num_users) = d_user;
  d_mean.bottomRows(params.num_items) = d_item;
  Matrix acc = d_mean;
  Matrix g = d_mean;
  for (int l = 1; l <= state.layers; ++l) {
    g = propagate(adj, g);
    acc += g;
  }
  acc /= static_cast<Real>(state.layers + 1);
  acc.bottomRows(params.num_items) += d_item;  // residual H^0_i
  acc += grads.initial;
  params.user_emb.grad += acc.topRows(params.num_users);
  params.item_emb.grad += acc.bottomRows(params.num_items);
}

}  // namespace bm3
