#include "bm3/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bm3/parallel.hpp"

namespace bm3 {

Matrix NormalizedAdjacency::to_dense() const {
  Matrix dense = Matrix::Zero(num_nodes(), num_nodes());
  for (Index r = 0; r < num_nodes(); ++r)
    for (Index k = row_offsets[r]; k < row_offsets[r + 1]; ++k) dense(r, columns[k]) = values[k];
  return dense;
}

NormalizedAdjacency build_adjacency(std::span<const Edge> train_edges, Index num_users, Index num_items) {
  NormalizedAdjacency adj;
  adj.num_users = num_users;
  adj.num_items = num_items;
  const Index n = num_users + num_items;

  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(train_edges.size() * 2);
  for (const auto& e : train_edges) {
    if (e.user < 0 || e.user >= num_users || e.item < 0 || e.item >= num_items)
      throw DataError("edge (" + std::to_string(e.user) + ", " + std::to_string(e.item) +
                      ") out of range for " + std::to_string(num_users) + " users and " +
                      std::to_string(num_items) + " items");
    pairs.emplace_back(e.user, num_users + e.item);
    pairs.emplace_back(num_users + e.item, e.user);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  for (const auto& [r, c] : pairs) ++degree[static_cast<std::size_t>(r)];

  adj.row_offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  for (Index r = 0; r < n; ++r) adj.row_offsets[r + 1] = adj.row_offsets[r] + degree[r];
  adj.columns.reserve(pairs.size());
  adj.values.reserve(pairs.size());
  for (const auto& [r, c] : pairs) {
    adj.columns.push_back(c);
    // Same expression for (r, c) and (c, r), so stored values are bit-symmetric.
    const Real dr = static_cast<Real>(degree[r]), dc = static_cast<Real>(degree[c]);
    adj.values.push_back(1.0 / std::sqrt(std::min(dr, dc) * std::max(dr, dc)));
  }
  return adj;
}

Matrix propagate(const NormalizedAdjacency& adj, const Matrix& h) {
  if (h.rows() != adj.num_nodes())
    throw DataError("propagate: embedding has " + std::to_string(h.rows()) + " rows, graph has " +
                    std::to_string(adj.num_nodes()) + " nodes");
  Matrix out = Matrix::Zero(h.rows(), h.cols());
  parallel_for(static_cast<std::size_t>(h.rows()), [&](std::size_t begin, std::size_t end) {
    for (auto r = static_cast<Index>(begin); r < static_cast<Index>(end); ++r) {
      auto row = out.row(r);
      for (Index k = adj.row_offsets[r]; k < adj.row_offsets[r + 1]; ++k)
        row.noalias() += adj.values[k] * h.row(adj.columns[k]);
    }
  });
  return out;
}

}  // namespace bm3
