#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bm3/common.hpp"
#include "bm3/data.hpp"
#include "bm3/graph.hpp"
#include "bm3/model.hpp"

namespace bm3 {

enum class Phase { kValid, kTest };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& name);

struct EvalConfig {
  std::vector<int> cutoffs{10, 20};
  Phase phase = Phase::kValid;
};

struct MetricsReport {
  std::vector<int> cutoffs;
  std::vector<double> recall;
  std::vector<double> ndcg;
  Index num_users = 0;

  double recall_at(int k) const;
  double ndcg_at(int k) const;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// true = item is excluded from ranking. Valid masks train items; test masks
/// train and valid items. Items held out for the phase stay candidates.
std::vector<char> candidate_mask(const SplitDataset& split, Index user, Phase phase);

/// Held-out items of the phase for one user.
const std::vector<Index>& phase_targets(const SplitDataset& split, Index user, Phase phase);

/// Top-k candidates by descending score, ties broken by ascending item index.
std::vector<Index> top_k(const Eigen::VectorXd& scores, const std::vector<char>& masked, int k);

double recall_at_k(std::span<const Index> ranked, std::span<const Index> targets, int k);

/// Binary-relevance NDCG with 1/log2(rank + 1) gains and IDCG over min(k, |targets|).
double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> targets, int k);

using ScoreFn = std::function<Eigen::VectorXd(Index user)>;

/// All-ranking evaluation of an arbitrary scorer; averages over users with
/// nonempty targets. Users are scored in parallel and reduced in user order.
MetricsReport evaluate_scores(const ScoreFn& scores, const SplitDataset& split, const EvalConfig& config);

/// Inference forward (no dropout) and scoring with predictor outputs.
MetricsReport evaluate(const ModelParams& params, const NormalizedAdjacency& adj, const SplitDataset& split,
                       int layers, const EvalConfig& config);

/// {"epoch": n, "phase": "...", "recall": {"10": x, ...}, "ndcg": {...}, "users": m}
std::string metrics_json(const MetricsReport& report, int epoch, Phase phase);

}  // namespace bm3
