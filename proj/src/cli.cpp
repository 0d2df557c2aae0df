#include "bm3/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "bm3/checkpoint.hpp"
#include "bm3/graph.hpp"

namespace bm3 {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// Collects per-field problems instead of failing on the first one.
class FieldReader {
 public:
  explicit FieldReader(const nlohmann::json& j) : j_(j) {}

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      problems_.push_back(std::string(key) + ": wrong type (got " + j_.at(key).type_name() + ")");
    }
  }

  void require(const char* key) {
    if (!j_.contains(key)) problems_.push_back(std::string(key) + ": required field missing");
  }

  void add_problem(std::string p) { problems_.push_back(std::move(p)); }

  void reject_unknown() {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) problems_.push_back(key + ": unknown field");
  }

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  const nlohmann::json& j_;
  std::set<std::string> seen_;
  std::vector<std::string> problems_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return fs::absolute(path.is_absolute() ? path : base / path).lexically_normal();
}

std::vector<FeatureMatrix> load_features(const RunConfig& cfg, Index num_items) {
  std::vector<FeatureMatrix> features;
  if (!cfg.visual_features.empty() && cfg.train.use_visual)
    features.push_back(load_feature_matrix(cfg.visual_features, num_items, "visual"));
  if (!cfg.textual_features.empty() && cfg.train.use_textual)
    features.push_back(load_feature_matrix(cfg.textual_features, num_items, "textual"));
  return features;
}

// Loads every feature file regardless of use_* switches (ablation toggles them per variant).
std::vector<FeatureMatrix> load_all_features(const RunConfig& cfg, Index num_items) {
  RunConfig all = cfg;
  all.train.use_visual = all.train.use_textual = true;
  return load_features(all, num_items);
}

void print_metrics_table(std::ostream& out, const std::string& label, const MetricsReport& m) {
  out << std::left << std::setw(16) << label;
  for (std::size_t k = 0; k < m.cutoffs.size(); ++k)
    out << "  R@" << m.cutoffs[k] << '=' << std::fixed << std::setprecision(4) << m.recall[k];
  for (std::size_t k = 0; k < m.cutoffs.size(); ++k)
    out << "  N@" << m.cutoffs[k] << '=' << std::fixed << std::setprecision(4) << m.ndcg[k];
  out << "  users=" << m.num_users << '\n';
}

RunConfig prepare_run(const fs::path& config_path, SplitDataset& split, std::vector<FeatureMatrix>& features,
                      bool all_features) {
  RunConfig cfg = load_run_config(config_path);
  split = load_split(cfg.dataset_dir);
  features = all_features ? load_all_features(cfg, split.num_items) : load_features(cfg, split.num_items);
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir / "config.json", run_config_json(cfg) + "\n");
  return cfg;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig cfg;
  FieldReader r(j);
  std::string dataset_dir, visual, textual, out_dir, dropout_mode = "element", reg_target = "readout";
  r.require("dataset_dir");
  r.require("out_dir");
  r.read("dataset_dir", dataset_dir);
  r.read("visual_features", visual);
  r.read("textual_features", textual);
  r.read("out_dir", out_dir);
  auto& t = cfg.train;
  r.read("embedding_dim", t.dim);
  r.read("num_layers", t.layers);
  r.read("dropout", t.drop_prob);
  r.read("reg_weight", t.lambda_reg);
  r.read("learning_rate", t.lr);
  r.read("batch_size", t.batch_size);
  r.read("max_epochs", t.max_epochs);
  r.read("patience", t.patience);
  r.read("seed", t.seed);
  r.read("use_visual", t.use_visual);
  r.read("use_textual", t.use_textual);
  r.read("enable_align", t.enable_align);
  r.read("enable_mask", t.enable_mask);
  r.read("dropout_mode", dropout_mode);
  r.read("reg_target", reg_target);
  r.read("cutoffs", t.cutoffs);
  r.read("grid_layers", cfg.grid.layers);
  r.read("grid_dropout", cfg.grid.drop_probs);
  r.read("grid_reg_weight", cfg.grid.lambdas);
  r.reject_unknown();

  if (dropout_mode == "element")
    t.dropout_mode = DropoutMode::kElement;
  else if (dropout_mode == "row")
    t.dropout_mode = DropoutMode::kRow;
  else
    r.add_problem("dropout_mode: expected \"element\" or \"row\"");
  if (reg_target == "readout")
    t.reg_target = RegTarget::kReadout;
  else if (reg_target == "initial")
    t.reg_target = RegTarget::kInitial;
  else
    r.add_problem("reg_target: expected \"readout\" or \"initial\"");

  auto problems = r.problems();
  for (auto& p : t.problems()) problems.push_back(p);
  if (cfg.grid.layers.empty() || cfg.grid.drop_probs.empty() || cfg.grid.lambdas.empty())
    problems.push_back("grid_*: grid axes must be nonempty");

  cfg.dataset_dir = resolve(base_dir, dataset_dir);
  cfg.visual_features = resolve(base_dir, visual);
  cfg.textual_features = resolve(base_dir, textual);
  cfg.out_dir = resolve(base_dir, out_dir);
  if (!dataset_dir.empty() && !fs::is_directory(cfg.dataset_dir))
    problems.push_back("dataset_dir: not a directory: " + cfg.dataset_dir.string());
  if (!visual.empty() && !fs::exists(cfg.visual_features))
    problems.push_back("visual_features: no such file: " + cfg.visual_features.string());
  if (!textual.empty() && !fs::exists(cfg.textual_features))
    problems.push_back("textual_features: no such file: " + cfg.textual_features.string());

  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_file(path), fs::absolute(path).parent_path());
}

std::string run_config_json(const RunConfig& c) {
  const auto& t = c.train;
  json j;
  j["dataset_dir"] = c.dataset_dir.string();
  j["visual_features"] = c.visual_features.string();
  j["textual_features"] = c.textual_features.string();
  j["out_dir"] = c.out_dir.string();
  j["embedding_dim"] = t.dim;
  j["num_layers"] = t.layers;
  j["dropout"] = t.drop_prob;
  j["reg_weight"] = t.lambda_reg;
  j["learning_rate"] = t.lr;
  j["batch_size"] = t.batch_size;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["seed"] = t.seed;
  j["use_visual"] = t.use_visual;
  j["use_textual"] = t.use_textual;
  j["enable_align"] = t.enable_align;
  j["enable_mask"] = t.enable_mask;
  j["dropout_mode"] = t.dropout_mode == DropoutMode::kRow ? "row" : "element";
  j["reg_target"] = t.reg_target == RegTarget::kInitial ? "initial" : "readout";
  j["cutoffs"] = t.cutoffs;
  j["grid_layers"] = c.grid.layers;
  j["grid_dropout"] = c.grid.drop_probs;
  j["grid_reg_weight"] = c.grid.lambdas;
  return j.dump(2);
}

void cmd_prepare(const PrepareArgs& args, std::ostream& out) {
  if (args.k < 1) throw ConfigError("--k must be >= 1");
  auto records = load_interactions(args.input);
  const std::size_t raw = records.size();
  records = kcore_filter(records, args.k);
  if (records.empty()) throw DataError("no interactions survive the " + std::to_string(args.k) + "-core filter");
  InteractionDataset ds = build_dataset(records);
  SplitDataset split = split_per_user(ds, args.seed);

  fs::create_directories(args.out_dir);
  write_records(args.out_dir / "interactions.tsv", records);
  write_index_map(args.out_dir / "user_index.tsv", ds.users);
  write_index_map(args.out_dir / "item_index.tsv", ds.items);
  write_edges(args.out_dir / "train.tsv", split.train_edges);
  write_edges(args.out_dir / "valid.tsv", split.valid_edges);
  write_edges(args.out_dir / "test.tsv", split.test_edges);

  const double sp = sparsity(ds);
  json stats;
  stats["users"] = ds.num_users();
  stats["items"] = ds.num_items();
  stats["interactions"] = ds.edges.size();
  stats["sparsity"] = sp;
  stats["k"] = args.k;
  stats["seed"] = args.seed;
  stats["raw_interactions"] = raw;
  stats["train"] = split.train_edges.size();
  stats["valid"] = split.valid_edges.size();
  stats["test"] = split.test_edges.size();
  write_file(args.out_dir / "stats.json", stats.dump(2) + "\n");

  out << "users         " << ds.num_users() << '\n'
      << "items         " << ds.num_items() << '\n'
      << "interactions  " << ds.edges.size() << '\n'
      << "sparsity      " << std::fixed << std::setprecision(2) << 100.0 * sp << "%\n"
      << "split         " << split.train_edges.size() << " / " << split.valid_edges.size() << " / "
      << split.test_edges.size() << '\n';
}

void cmd_train(const fs::path& config_path, std::ostream& out) {
  SplitDataset split;
  std::vector<FeatureMatrix> features;
  RunConfig cfg = prepare_run(config_path, split, features, false);
  TrainOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.dataset_dir = cfg.dataset_dir.string();
  auto result = train(split, features, cfg.train, opts);
  const auto& r = result.report;
  out << "epochs run      " << r.loss_trace.size() << '\n' << "best epoch      " << r.best_epoch << '\n';
  print_metrics_table(out, "valid (best)", r.best_valid);
  print_metrics_table(out, "test", r.test_metrics);
}

void cmd_evaluate(const fs::path& checkpoint_dir, Phase phase, const fs::path& data_dir, const fs::path& out_file,
                  std::ostream& out) {
  Checkpoint ck = load_checkpoint(checkpoint_dir);
  const fs::path dir = data_dir.empty() ? fs::path(ck.manifest.dataset_dir) : data_dir;
  if (dir.empty()) throw ConfigError("checkpoint does not record a dataset directory; pass --data");
  SplitDataset split = load_split(dir);
  if (fingerprint_hex(fingerprint(split)) != ck.manifest.dataset_fingerprint)
    throw DataError("dataset in " + dir.string() + " does not match the checkpoint fingerprint");
  const NormalizedAdjacency adj = build_adjacency(split.train_edges, split.num_users, split.num_items);
  MetricsReport m = evaluate(ck.params, adj, split, ck.manifest.layers, EvalConfig{ck.manifest.cutoffs, phase});
  const std::string text = metrics_json(m, ck.manifest.epoch, phase) + "\n";
  if (!out_file.empty()) write_file(out_file, text);
  out << text;
}

void cmd_ablate(const fs::path& config_path, std::ostream& out) {
  SplitDataset split;
  std::vector<FeatureMatrix> features;
  RunConfig cfg = prepare_run(config_path, split, features, true);
  TrainOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.dataset_dir = cfg.dataset_dir.string();
  auto rows = run_ablation(split, features, cfg.train, opts);
  for (const auto& row : rows) print_metrics_table(out, row.label, row.report.test_metrics);
}

void cmd_grid(const fs::path& config_path, std::ostream& out) {
  SplitDataset split;
  std::vector<FeatureMatrix> features;
  RunConfig cfg = prepare_run(config_path, split, features, false);
  TrainOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.dataset_dir = cfg.dataset_dir.string();
  auto result = run_grid(split, features, cfg.train, cfg.grid, opts);
  out << grid_tsv(result);
  const auto& best = result.cells[result.best].config;
  out << "best: L=" << best.layers << " dropout=" << best.drop_prob << " reg_weight=" << best.lambda_reg << '\n';
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"BM3 multi-modal recommender: prepare data, train, evaluate, ablate, grid-search"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "k-core filter, index and split raw interactions");
  prepare->add_option("--input", prep.input, "interaction file (user<TAB>item[<TAB>timestamp])")->required();
  prepare->add_option("--k", prep.k, "k-core threshold")->capture_default_str();
  prepare->add_option("--seed", prep.seed, "split seed")->capture_default_str();
  prepare->add_option("--out", prep.out_dir, "output directory")->required();

  fs::path config;
  auto* train_cmd = app.add_subcommand("train", "train with early stopping and test the best checkpoint");
  train_cmd->add_option("--config", config, "run config (JSON)")->required();
  auto* ablate = app.add_subcommand("ablate", "run the seven ablation variants");
  ablate->add_option("--config", config, "run config (JSON)")->required();
  auto* grid = app.add_subcommand("grid", "grid search over layers, dropout and reg weight");
  grid->add_option("--config", config, "run config (JSON)")->required();

  fs::path checkpoint, data_dir, out_file;
  std::string phase = "test";
  auto* eval = app.add_subcommand("evaluate", "evaluate a saved checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--phase", phase, "valid or test")->capture_default_str();
  eval->add_option("--data", data_dir, "prepared dataset directory (default: from manifest)");
  eval->add_option("--out", out_file, "also write the metrics JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*prepare) {
      if (!fs::exists(prep.input)) throw DataError("input file not found: " + prep.input.string());
      cmd_prepare(prep, out);
    } else if (*train_cmd) {
      cmd_train(config, out);
    } else if (*eval) {
      cmd_evaluate(checkpoint, parse_phase(phase), data_dir, out_file, out);
    } else if (*ablate) {
      cmd_ablate(config, out);
    } else if (*grid) {
      cmd_grid(config, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace bm3
