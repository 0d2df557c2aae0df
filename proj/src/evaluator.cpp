#include "bm3/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "bm3/parallel.hpp"

namespace bm3 {

std::string to_string(Phase phase) { return phase == Phase::kValid ? "valid" : "test"; }

Phase parse_phase(const std::string& name) {
  if (name == "valid") return Phase::kValid;
  if (name == "test") return Phase::kTest;
  throw ConfigError("unknown phase '" + name + "' (expected valid or test)");
}

double MetricsReport::recall_at(int k) const {
  for (std::size_t j = 0; j < cutoffs.size(); ++j)
    if (cutoffs[j] == k) return recall[j];
  throw ConfigError("cutoff " + std::to_string(k) + " was not evaluated");
}

double MetricsReport::ndcg_at(int k) const {
  for (std::size_t j = 0; j < cutoffs.size(); ++j)
    if (cutoffs[j] == k) return ndcg[j];
  throw ConfigError("cutoff " + std::to_string(k) + " was not evaluated");
}

std::vector<char> candidate_mask(const SplitDataset& split, Index user, Phase phase) {
  std::vector<char> masked(static_cast<std::size_t>(split.num_items), 0);
  for (Index i : split.per_user_train[static_cast<std::size_t>(user)]) masked[static_cast<std::size_t>(i)] = 1;
  if (phase == Phase::kTest)
    for (Index i : split.per_user_valid[static_cast<std::size_t>(user)]) masked[static_cast<std::size_t>(i)] = 1;
  return masked;
}

const std::vector<Index>& phase_targets(const SplitDataset& split, Index user, Phase phase) {
  return phase == Phase::kValid ? split.per_user_valid[static_cast<std::size_t>(user)]
                                : split.per_user_test[static_cast<std::size_t>(user)];
}

std::vector<Index> top_k(const Eigen::VectorXd& scores, const std::vector<char>& masked, int k) {
  std::vector<Index> candidates;
  candidates.reserve(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i)
    if (!masked[static_cast<std::size_t>(i)]) candidates.push_back(i);
  const auto n = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(std::max(k, 0)));
  auto better = [&scores](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(), better);
  candidates.resize(n);
  return candidates;
}

namespace {

bool contains(std::span<const Index> targets, Index item) {
  return std::find(targets.begin(), targets.end(), item) != targets.end();
}

}  // namespace

double recall_at_k(std::span<const Index> ranked, std::span<const Index> targets, int k) {
  if (targets.empty()) throw DataError("recall requires a nonempty target set");
  const auto n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) hits += contains(targets, ranked[r]);
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> targets, int k) {
  if (targets.empty()) throw DataError("ndcg requires a nonempty target set");
  const auto n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  double dcg = 0;
  for (std::size_t r = 0; r < n; ++r)
    if (contains(targets, ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0;
  const auto ideal = std::min<std::size_t>(targets.size(), static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

MetricsReport evaluate_scores(const ScoreFn& scores, const SplitDataset& split, const EvalConfig& config) {
  if (config.cutoffs.empty() || !std::is_sorted(config.cutoffs.begin(), config.cutoffs.end()) ||
      config.cutoffs.front() <= 0)
    throw ConfigError("cutoffs must be positive and sorted ascending");
  const int max_k = config.cutoffs.back();
  const std::size_t nk = config.cutoffs.size();
  const auto num_users = static_cast<std::size_t>(split.num_users);

  // Per-user rows: [recall..., ndcg...]; NaN marks users without targets.
  std::vector<double> per_user(num_users * 2 * nk, std::numeric_limits<double>::quiet_NaN());
  parallel_for(num_users, [&](std::size_t begin, std::size_t end) {
    for (std::size_t u = begin; u < end; ++u) {
      const auto user = static_cast<Index>(u);
      const auto& targets = phase_targets(split, user, config.phase);
      if (targets.empty()) continue;
      auto ranked = top_k(scores(user), candidate_mask(split, user, config.phase), max_k);
      for (std::size_t j = 0; j < nk; ++j) {
        per_user[u * 2 * nk + j] = recall_at_k(ranked, targets, config.cutoffs[j]);
        per_user[u * 2 * nk + nk + j] = ndcg_at_k(ranked, targets, config.cutoffs[j]);
      }
    }
  }, 64);

  MetricsReport report;
  report.cutoffs = config.cutoffs;
  report.recall.assign(nk, 0.0);
  report.ndcg.assign(nk, 0.0);
  for (std::size_t u = 0; u < num_users; ++u) {
    if (std::isnan(per_user[u * 2 * nk])) continue;
    ++report.num_users;
    for (std::size_t j = 0; j < nk; ++j) {
      report.recall[j] += per_user[u * 2 * nk + j];
      report.ndcg[j] += per_user[u * 2 * nk + nk + j];
    }
  }
  if (report.num_users > 0) {
    for (std::size_t j = 0; j < nk; ++j) {
      report.recall[j] /= static_cast<double>(report.num_users);
      report.ndcg[j] /= static_cast<double>(report.num_users);
    }
  }
  return report;
}

MetricsReport evaluate(const ModelParams& params, const NormalizedAdjacency& adj, const SplitDataset& split,
                       int layers, const EvalConfig& config) {
  const ForwardState state = forward_online(params, adj, {}, layers);
  return evaluate_scores([&state](Index user) { return score_all(state, user); }, split, config);
}

std::string metrics_json(const MetricsReport& report, int epoch, Phase phase) {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["phase"] = to_string(phase);
  nlohmann::ordered_json recall, ndcg;
  for (std::size_t k = 0; k < report.cutoffs.size(); ++k) {
    recall[std::to_string(report.cutoffs[k])] = report.recall[k];
    ndcg[std::to_string(report.cutoffs[k])] = report.ndcg[k];
  }
  j["recall"] = recall;
  j["ndcg"] = ndcg;
  j["users"] = report.num_users;
  return j.dump();
}

}  // namespace bm3
