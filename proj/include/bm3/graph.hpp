#pragma once

#include <span>
#include <vector>

#include "bm3/common.hpp"

namespace bm3 {

/// Symmetric-normalized user-item adjacency D^-1/2 A D^-1/2 in CSR form.
/// Users occupy nodes [0, num_users), items [num_users, num_users + num_items).
/// Immutable after construction.
struct NormalizedAdjacency {
  Index num_users = 0;
  Index num_items = 0;
  std::vector<Index> row_offsets;  // num_nodes + 1
  std::vector<Index> columns;
  std::vector<Real> values;

  Index num_nodes() const { return num_users + num_items; }
  std::size_t nnz() const { return values.size(); }

  /// Dense copy, for tests and small-graph diagnostics.
  Matrix to_dense() const;
};

NormalizedAdjacency build_adjacency(std::span<const Edge> train_edges, Index num_users, Index num_items);

/// Returns adj * h. Output rows are partitioned across workers.
Matrix propagate(const NormalizedAdjacency& adj, const Matrix& h);

}  // namespace bm3
