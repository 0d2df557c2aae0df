#pragma once

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bm3/data.hpp"
#include "bm3/graph.hpp"
#include "bm3/loss.hpp"
#include "bm3/model.hpp"

namespace bm3::testing {

/// Users split into blocks; every user interacts with every item of its block.
inline SplitDataset planted_blocks(int num_blocks, int users_per_block, int items_per_block, std::uint64_t seed) {
  InteractionDataset ds;
  std::vector<InteractionRecord> records;
  for (int b = 0; b < num_blocks; ++b)
    for (int u = 0; u < users_per_block; ++u)
      for (int i = 0; i < items_per_block; ++i)
        records.push_back({"u" + std::to_string(b * users_per_block + u), "i" + std::to_string(b * items_per_block + i),
                           std::nullopt});
  // Index maps follow first appearance after (user, item) key sorting; fine for tests.
  return split_per_user(build_dataset(records), seed);
}

/// Random bipartite edges without duplicates.
inline std::vector<Edge> random_edges(Index nu, Index ni, std::size_t count, std::mt19937_64& gen) {
  std::set<std::pair<Index, Index>> seen;
  std::uniform_int_distribution<Index> du(0, nu - 1), di(0, ni - 1);
  std::size_t guard = 0;
  while (seen.size() < count && guard++ < count * 100) seen.insert({du(gen), di(gen)});
  std::vector<Edge> edges;
  for (auto [u, i] : seen) edges.push_back({u, i});
  return edges;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = n(gen);
  return m;
}

/// Gaussian visual (d_v) and textual (d_t) features for every item.
inline std::vector<FeatureMatrix> random_features(Index num_items, Index d_v, Index d_t, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<FeatureMatrix> out;
  out.push_back({"visual", random_matrix(num_items, d_v, gen)});
  out.push_back({"textual", random_matrix(num_items, d_t, gen)});
  return out;
}

/// 2 users, 4 items, both modalities (d_v = 5, d_t = 3).
struct ToyInstance {
  SplitDataset split;
  NormalizedAdjacency adj;
  std::vector<FeatureMatrix> features;
  ModelParams params;
  std::vector<Edge> batch;
  int layers = 1;
};

inline ToyInstance make_toy(int layers, Index dim, std::uint64_t seed) {
  ToyInstance t;
  t.layers = layers;
  t.split.num_users = 2;
  t.split.num_items = 4;
  t.split.train_edges = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {1, 3}};
  t.split.index_per_user();
  t.adj = build_adjacency(t.split.train_edges, 2, 4);
  std::mt19937_64 gen(seed);
  t.features.push_back({"visual", random_matrix(4, 5, gen)});
  t.features.push_back({"textual", random_matrix(4, 3, gen)});
  t.params = init_model(2, 4, dim, {{"v", 5}, {"t", 3}}, seed);
  // Nonzero biases so their gradients are exercised.
  for (auto* layer : {&t.params.projections.at("v"), &t.params.projections.at("t"), &t.params.predictor})
    layer->bias.value = random_matrix(1, dim, gen, 0.1);
  t.batch = {{0, 0}, {1, 3}, {0, 2}, {1, 1}, {0, 2}};
  return t;
}

inline LossConfig full_loss_config(double lambda) {
  LossConfig c;
  c.lambda_reg = lambda;
  c.enabled_modalities = {"v", "t"};
  c.enable_align = true;
  c.enable_mask = true;
  c.norm_eps = 0;
  return c;
}

/// Temporary directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("bm3_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace bm3::testing
