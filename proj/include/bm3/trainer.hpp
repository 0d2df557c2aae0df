#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bm3/data.hpp"
#include "bm3/evaluator.hpp"
#include "bm3/loss.hpp"
#include "bm3/model.hpp"

namespace bm3 {

struct TrainConfig {
  Index dim = 64;
  int layers = 1;
  double drop_prob = 0.5;
  double lambda_reg = 0.1;
  double lr = 1e-3;
  Index batch_size = 2048;
  int max_epochs = 1000;
  int patience = 20;
  std::uint64_t seed = 2023;
  bool use_visual = true;
  bool use_textual = true;
  bool enable_align = true;
  bool enable_mask = true;
  DropoutMode dropout_mode = DropoutMode::kElement;
  RegTarget reg_target = RegTarget::kReadout;
  std::vector<int> cutoffs{10, 20};

  /// Every violated constraint, one message per field.
  std::vector<std::string> problems() const;
  void validate() const;
};

struct TrainReport {
  int best_epoch = 0;                     // 1-based
  double best_valid_r20 = 0;
  MetricsReport best_valid;
  MetricsReport test_metrics;             // best checkpoint, reloaded precision
  std::vector<LossBreakdown> loss_trace;  // per epoch, mean over train edges
  std::vector<MetricsReport> valid_trace;
  std::vector<double> epoch_seconds;      // training time per epoch, excluding validation
};

struct TrainOptions {
  /// When set: metrics.jsonl, checkpoint/, test_metrics.json and report.json go here.
  std::filesystem::path out_dir;
  /// Recorded in the checkpoint manifest so `evaluate` can find the data.
  std::string dataset_dir;
  /// Called after every epoch with the metrics-log line.
  std::function<void(const std::string&)> on_epoch;
};

struct TrainResult {
  TrainReport report;
  ModelParams params;  // best epoch, rounded to checkpoint precision
};

/// Features whose modality is switched on in the config.
std::vector<FeatureMatrix> select_features(const std::vector<FeatureMatrix>& features, const TrainConfig& config);

TrainResult train(const SplitDataset& split, const std::vector<FeatureMatrix>& features, const TrainConfig& config,
                  const TrainOptions& options = {});

struct AblationRow {
  std::string label;
  TrainConfig config;
  TrainReport report;
};

/// Full model plus the feature ablations (w/o v&t, w/o v, w/o t) and loss
/// ablations (w/o mm, w/o inter, w/o intra).
std::vector<AblationRow> run_ablation(const SplitDataset& split, const std::vector<FeatureMatrix>& features,
                                      const TrainConfig& base, const TrainOptions& options = {});

struct GridSpec {
  std::vector<int> layers;
  std::vector<double> drop_probs;
  std::vector<double> lambdas;
};

struct GridCell {
  TrainConfig config;
  TrainReport report;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;  // argmax of validation R@20, first cell wins ties
};

GridResult run_grid(const SplitDataset& split, const std::vector<FeatureMatrix>& features, const TrainConfig& base,
                    const GridSpec& grid, const TrainOptions& options = {});

std::string ablation_tsv(const std::vector<AblationRow>& rows);
std::string grid_tsv(const GridResult& result);
std::string report_json(const TrainReport& report);
std::string loss_json(const LossBreakdown& loss);

}  // namespace bm3
