#include "bm3/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "bm3/checkpoint.hpp"
#include "bm3/graph.hpp"

namespace bm3 {
namespace {

using json = nlohmann::ordered_json;

json metrics_to_json(const MetricsReport& m) {
  json recall, ndcg;
  for (std::size_t k = 0; k < m.cutoffs.size(); ++k) {
    recall[std::to_string(m.cutoffs[k])] = m.recall[k];
    ndcg[std::to_string(m.cutoffs[k])] = m.ndcg[k];
  }
  return json{{"recall", recall}, {"ndcg", ndcg}, {"users", m.num_users}};
}

json loss_to_json(const LossBreakdown& l) {
  return json{{"rec", l.rec}, {"align", l.align}, {"mask", l.mask}, {"reg", l.reg}, {"total", l.total}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::vector<Index> unique_items(std::span<const Edge> batch) {
  std::vector<Index> items;
  items.reserve(batch.size());
  for (const auto& e : batch) items.push_back(e.item);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

}  // namespace

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  if (dim < 1) out.push_back("embedding_dim: must be >= 1");
  if (layers < 1) out.push_back("num_layers: must be >= 1");
  if (!(drop_prob >= 0 && drop_prob < 1)) out.push_back("dropout: must be in [0, 1)");
  if (!(lambda_reg >= 0)) out.push_back("reg_weight: must be >= 0");
  if (!(lr >= 0)) out.push_back("learning_rate: must be >= 0");
  if (batch_size < 1) out.push_back("batch_size: must be >= 1");
  if (max_epochs < 1) out.push_back("max_epochs: must be >= 1");
  if (patience < 1 || patience > max_epochs) out.push_back("patience: must be in [1, max_epochs]");
  if (cutoffs.empty() || !std::is_sorted(cutoffs.begin(), cutoffs.end()) || cutoffs.front() < 1)
    out.push_back("cutoffs: must be positive and sorted ascending");
  else if (std::find(cutoffs.begin(), cutoffs.end(), 20) == cutoffs.end())
    out.push_back("cutoffs: must include 20 (validation R@20 drives early stopping)");
  return out;
}

void TrainConfig::validate() const {
  auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid training config:";
  for (const auto& s : p) msg += "\n  " + s;
  throw ConfigError(msg);
}

std::vector<FeatureMatrix> select_features(const std::vector<FeatureMatrix>& features, const TrainConfig& config) {
  std::vector<FeatureMatrix> out;
  for (const auto& f : features) {
    if (f.modality_tag == "visual" && !config.use_visual) continue;
    if (f.modality_tag == "textual" && !config.use_textual) continue;
    out.push_back(f);
  }
  return out;
}

TrainResult train(const SplitDataset& split, const std::vector<FeatureMatrix>& features, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (split.train_edges.empty()) throw DataError("training set is empty");

  const std::vector<FeatureMatrix> loaded = select_features(features, config);
  std::map<std::string, Index> modality_dims;
  for (const auto& f : loaded) {
    if (f.rows() != split.num_items)
      throw DataError("feature matrix '" + f.modality_tag + "' has " + std::to_string(f.rows()) + " rows, dataset has " +
                      std::to_string(split.num_items) + " items");
    modality_dims[modality_key(f.modality_tag)] = f.dim();
  }
  // Modalities only enter the computation through the multi-modal losses.
  const bool multimodal = config.enable_align || config.enable_mask;
  const std::vector<FeatureMatrix> active = multimodal ? loaded : std::vector<FeatureMatrix>{};
  std::vector<std::string> active_keys;
  for (const auto& f : active) active_keys.push_back(modality_key(f.modality_tag));

  ModelParams params = init_model(split.num_users, split.num_items, config.dim, modality_dims, config.seed);
  const NormalizedAdjacency adj = build_adjacency(split.train_edges, split.num_users, split.num_items);

  LossConfig loss_cfg;
  loss_cfg.lambda_reg = config.lambda_reg;
  loss_cfg.enabled_modalities = active_keys;
  loss_cfg.enable_align = config.enable_align && !active_keys.empty();
  loss_cfg.enable_mask = config.enable_mask && !active_keys.empty();
  loss_cfg.reg_target = config.reg_target;

  ForwardOptions fwd;
  fwd.layers = config.layers;
  fwd.drop_prob = config.drop_prob;
  fwd.dropout_mode = config.dropout_mode;

  AdamState adam;
  adam.lr = config.lr;
  const std::vector<ParamTensor*> trainable = params.trainable(active_keys);

  std::ofstream metrics_log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    metrics_log.open(options.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_log) throw DataError("cannot write metrics log in " + options.out_dir.string());
  }

  TrainReport report;
  report.best_valid_r20 = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values;
  int since_best = 0;
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  const EvalConfig valid_cfg{config.cutoffs, Phase::kValid};
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Edge> edges = split.train_edges;
    Rng shuffle_rng(config.seed + static_cast<std::uint64_t>(epoch - 1));
    shuffle_rng.shuffle(edges);

    LossBreakdown epoch_loss;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < edges.size(); start += batch_size, ++batch_index) {
      std::span<const Edge> batch(edges.data() + start, std::min(batch_size, edges.size() - start));
      const auto where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      try {
        const std::vector<Index> items = active.empty() ? std::vector<Index>{} : unique_items(batch);
        ForwardState state = forward(params, adj, active, fwd, dropout_rng, active.empty() ? nullptr : &items);
        ForwardGrads grads = ForwardGrads::zeros_like(state);
        LossBreakdown l = total_loss(state, batch, loss_cfg, &grads);
        if (!std::isfinite(l.total)) throw NumericError("non-finite loss");
        backward(params, adj, active, state, grads);
        adam_step(trainable, adam);
        const double w = static_cast<double>(batch.size()) / static_cast<double>(edges.size());
        epoch_loss.rec += w * l.rec;
        epoch_loss.align += w * l.align;
        epoch_loss.mask += w * l.mask;
        epoch_loss.reg += w * l.reg;
        epoch_loss.total += w * l.total;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at " + where);
      }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.loss_trace.push_back(epoch_loss);
    report.epoch_seconds.push_back(seconds);

    MetricsReport valid = evaluate(params, adj, split, config.layers, valid_cfg);
    report.valid_trace.push_back(valid);
    const double r20 = valid.recall_at(20);
    if (r20 > report.best_valid_r20) {
      report.best_valid_r20 = r20;
      report.best_epoch = epoch;
      report.best_valid = valid;
      best_values.clear();
      for (const ParamTensor* p : params.all_params()) best_values.push_back(p->value);
      since_best = 0;
    } else {
      ++since_best;
    }

    json line;
    line["epoch"] = epoch;
    line["phase"] = "valid";
    auto m = metrics_to_json(valid);
    line["recall"] = m["recall"];
    line["ndcg"] = m["ndcg"];
    line["users"] = m["users"];
    line["loss"] = loss_to_json(epoch_loss);
    line["seconds"] = seconds;
    const std::string text = line.dump();
    if (metrics_log.is_open()) metrics_log << text << '\n' << std::flush;
    if (options.on_epoch) options.on_epoch(text);

    if (since_best >= config.patience) break;
  }

  {
    auto ps = params.all_params();
    for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value = best_values[k];
  }
  round_to_checkpoint_precision(params);
  report.test_metrics = evaluate(params, adj, split, config.layers, EvalConfig{config.cutoffs, Phase::kTest});

  if (!options.out_dir.empty()) {
    CheckpointManifest manifest;
    manifest.dim = config.dim;
    manifest.layers = config.layers;
    manifest.drop_prob = config.drop_prob;
    manifest.lambda_reg = config.lambda_reg;
    manifest.num_users = split.num_users;
    manifest.num_items = split.num_items;
    manifest.modality_dims = modality_dims;
    manifest.dataset_fingerprint = fingerprint_hex(fingerprint(split));
    manifest.epoch = report.best_epoch;
    manifest.dataset_dir = options.dataset_dir;
    manifest.cutoffs = config.cutoffs;
    save_checkpoint(options.out_dir / "checkpoint", params, manifest);
    write_text(options.out_dir / "test_metrics.json",
               metrics_json(report.test_metrics, report.best_epoch, Phase::kTest) + "\n");
    write_text(options.out_dir / "report.json", report_json(report) + "\n");
  }
  return TrainResult{std::move(report), std::move(params)};
}

std::vector<AblationRow> run_ablation(const SplitDataset& split, const std::vector<FeatureMatrix>& features,
                                      const TrainConfig& base, const TrainOptions& options) {
  struct Variant {
    const char* label;
    const char* slug;
    bool visual, textual, align, mask;
  };
  const Variant variants[] = {
      {"BM3 w/o v&t", "wo_vt", false, false, base.enable_align, base.enable_mask},
      {"BM3 w/o v", "wo_v", false, true, base.enable_align, base.enable_mask},
      {"BM3 w/o t", "wo_t", true, false, base.enable_align, base.enable_mask},
      {"BM3 w/o mm", "wo_mm", true, true, false, false},
      {"BM3 w/o inter", "wo_inter", true, true, false, true},
      {"BM3 w/o intra", "wo_intra", true, true, true, false},
      {"BM3", "full", true, true, true, true},
  };
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    TrainConfig cfg = base;
    cfg.use_visual = v.visual;
    cfg.use_textual = v.textual;
    cfg.enable_align = v.align;
    cfg.enable_mask = v.mask;
    TrainOptions opts = options;
    if (!options.out_dir.empty()) opts.out_dir = options.out_dir / v.slug;
    rows.push_back({v.label, cfg, train(split, features, cfg, opts).report});
  }
  if (!options.out_dir.empty()) write_text(options.out_dir / "ablation.tsv", ablation_tsv(rows));
  return rows;
}

GridResult run_grid(const SplitDataset& split, const std::vector<FeatureMatrix>& features, const TrainConfig& base,
                    const GridSpec& grid, const TrainOptions& options) {
  if (grid.layers.empty() || grid.drop_probs.empty() || grid.lambdas.empty())
    throw ConfigError("grid axes must be nonempty");
  GridResult result;
  for (int layers : grid.layers) {
    for (double p : grid.drop_probs) {
      for (double lambda : grid.lambdas) {
        TrainConfig cfg = base;
        cfg.layers = layers;
        cfg.drop_prob = p;
        cfg.lambda_reg = lambda;
        TrainOptions opts = options;
        if (!options.out_dir.empty()) {
          std::ostringstream name;
          name << "L" << layers << "_p" << p << "_lambda" << lambda;
          opts.out_dir = options.out_dir / name.str();
        }
        result.cells.push_back({cfg, train(split, features, cfg, opts).report});
        const auto& cells = result.cells;
        if (cells.back().report.best_valid_r20 > cells[result.best].report.best_valid_r20)
          result.best = cells.size() - 1;
      }
    }
  }
  if (!options.out_dir.empty()) write_text(options.out_dir / "grid.tsv", grid_tsv(result));
  return result;
}

std::string ablation_tsv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "variant\tbest_epoch\tvalid_R@20";
  if (!rows.empty())
    for (int k : rows.front().report.test_metrics.cutoffs) out << "\tR@" << k;
  if (!rows.empty())
    for (int k : rows.front().report.test_metrics.cutoffs) out << "\tN@" << k;
  out << '\n';
  for (const auto& r : rows) {
    out << r.label << '\t' << r.report.best_epoch << '\t' << r.report.best_valid_r20;
    for (double v : r.report.test_metrics.recall) out << '\t' << v;
    for (double v : r.report.test_metrics.ndcg) out << '\t' << v;
    out << '\n';
  }
  return out.str();
}

std::string grid_tsv(const GridResult& result) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "L\tdropout\treg_weight\tbest_epoch\tvalid_R@20\ttest_R@20\ttest_N@20\tseconds_per_epoch\tbest\n";
  for (std::size_t k = 0; k < result.cells.size(); ++k) {
    const auto& c = result.cells[k];
    const auto& secs = c.report.epoch_seconds;
    const double mean_secs = secs.empty() ? 0.0 : std::accumulate(secs.begin(), secs.end(), 0.0) / static_cast<double>(secs.size());
    out << c.config.layers << '\t' << c.config.drop_prob << '\t' << c.config.lambda_reg << '\t'
        << c.report.best_epoch << '\t' << c.report.best_valid_r20 << '\t' << c.report.test_metrics.recall_at(20) << '\t'
        << c.report.test_metrics.ndcg_at(20) << '\t' << mean_secs << '\t' << (k == result.best ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string loss_json(const LossBreakdown& loss) { return loss_to_json(loss).dump(); }

std::string report_json(const TrainReport& report) {
  json j;
  j["best_epoch"] = report.best_epoch;
  j["best_valid_r20"] = report.best_valid_r20;
  j["best_valid"] = metrics_to_json(report.best_valid);
  j["test"] = metrics_to_json(report.test_metrics);
  json losses = json::array();
  for (const auto& l : report.loss_trace) losses.push_back(loss_to_json(l));
  j["loss_trace"] = losses;
  j["epoch_seconds"] = report.epoch_seconds;
  return j.dump();
}

}  // namespace bm3
