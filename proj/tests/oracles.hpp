#pragma once
// Brute-force reference implementations used only by tests. They deliberately
// avoid the library's code paths (CSR, partial sorts, round-based deletion).

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "bm3/common.hpp"

namespace bm3::oracle {

using EdgeSet = std::set<std::pair<int, int>>;

/// Deletes one deficient node at a time until none remains.
inline EdgeSet kcore(EdgeSet edges, int k) {
  while (true) {
    std::map<int, int> udeg, ideg;
    for (auto [u, i] : edges) {
      ++udeg[u];
      ++ideg[i];
    }
    bool removed = false;
    for (auto [u, d] : udeg) {
      if (d < k) {
        std::erase_if(edges, [u = u](const auto& e) { return e.first == u; });
        removed = true;
        break;
      }
    }
    if (removed) continue;
    for (auto [i, d] : ideg) {
      if (d < k) {
        std::erase_if(edges, [i = i](const auto& e) { return e.second == i; });
        removed = true;
        break;
      }
    }
    if (!removed) return edges;
  }
}

/// D^-1/2 A D^-1/2 formed with dense matrices.
inline Matrix normalized_adjacency(const std::vector<Edge>& edges, Index nu, Index ni) {
  const Index n = nu + ni;
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : edges) {
    a(e.user, nu + e.item) = 1;
    a(nu + e.item, e.user) = 1;
  }
  Matrix d_inv_sqrt = Matrix::Zero(n, n);
  for (Index r = 0; r < n; ++r) {
    const Real deg = a.row(r).sum();
    if (deg > 0) d_inv_sqrt(r, r) = 1.0 / std::sqrt(deg);
  }
  return d_inv_sqrt * a * d_inv_sqrt;
}

inline double recall(const std::vector<Index>& ranked, const std::vector<Index>& targets, int k) {
  std::set<Index> top(ranked.begin(), ranked.begin() + std::min<std::size_t>(ranked.size(), k));
  std::set<Index> t(targets.begin(), targets.end());
  std::vector<Index> inter;
  std::set_intersection(top.begin(), top.end(), t.begin(), t.end(), std::back_inserter(inter));
  return static_cast<double>(inter.size()) / static_cast<double>(t.size());
}

/// DCG of the given list over the best reordering of the same relevance
/// vector extended with every target (the ideal list).
inline double ndcg(const std::vector<Index>& ranked, const std::vector<Index>& targets, int k) {
  std::set<Index> t(targets.begin(), targets.end());
  auto dcg = [k](const std::vector<int>& rel) {
    double s = 0;
    for (std::size_t r = 0; r < rel.size() && static_cast<int>(r) < k; ++r)
      s += rel[r] / std::log2(static_cast<double>(r) + 2.0);
    return s;
  };
  std::vector<int> rel;
  for (Index i : ranked) rel.push_back(t.count(i) ? 1 : 0);
  std::vector<int> ideal(t.size(), 1);
  ideal.resize(std::max(ideal.size(), static_cast<std::size_t>(k)), 0);
  return dcg(rel) / dcg(ideal);
}

/// Full sort of candidates by (-score, index).
inline std::vector<Index> full_ranking(const Eigen::VectorXd& scores, const std::set<Index>& masked) {
  std::vector<std::pair<double, Index>> rows;
  for (Index i = 0; i < scores.size(); ++i)
    if (!masked.count(i)) rows.emplace_back(-scores[i], i);
  std::sort(rows.begin(), rows.end());
  std::vector<Index> out;
  for (auto& [s, i] : rows) out.push_back(i);
  return out;
}

}  // namespace bm3::oracle
