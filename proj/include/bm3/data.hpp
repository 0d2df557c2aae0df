#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bm3/common.hpp"

namespace bm3 {

/// One observed positive user-item interaction.
struct InteractionRecord {
  std::string user_key;
  std::string item_key;
  std::optional<std::int64_t> timestamp;
  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Bijection between opaque string keys and dense indices [0, size).
class KeyIndex {
 public:
  /// Returns the existing index for key, or assigns the next one.
  Index intern(const std::string& key);
  std::optional<Index> find(const std::string& key) const;
  const std::string& key(Index idx) const { return keys_.at(static_cast<std::size_t>(idx)); }
  Index size() const { return static_cast<Index>(keys_.size()); }
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, Index> lookup_;
};

struct InteractionDataset {
  KeyIndex users;
  KeyIndex items;
  std::vector<Edge> edges;

  Index num_users() const { return users.size(); }
  Index num_items() const { return items.size(); }
};

struct SplitDataset {
  Index num_users = 0;
  Index num_items = 0;
  std::vector<Edge> train_edges;
  std::vector<Edge> valid_edges;
  std::vector<Edge> test_edges;
  // Per-user item lists, sorted ascending by item index.
  std::vector<std::vector<Index>> per_user_train;
  std::vector<std::vector<Index>> per_user_valid;
  std::vector<std::vector<Index>> per_user_test;

  /// Rebuilds the per-user lists from the three edge lists.
  void index_per_user();
};

struct FeatureMatrix {
  std::string modality_tag;  // "visual", "textual", or any other name
  Matrix data;               // row r = features of item index r

  Index rows() const { return data.rows(); }
  Index dim() const { return data.cols(); }
};

struct InteractionFormat {
  char delimiter = '\t';
  char comment = '#';
};

std::vector<InteractionRecord> load_interactions(const std::filesystem::path& path,
                                                 const InteractionFormat& format = {});

/// Collapses duplicate (user, item) pairs keeping first-seen order and the
/// earliest timestamp.
std::vector<InteractionRecord> deduplicate(const std::vector<InteractionRecord>& records);

/// Maximal subset in which every user and every item has at least k records.
/// Deficient users and items are removed simultaneously each round until no
/// node is deficient. Surviving records keep their input order.
std::vector<InteractionRecord> kcore_filter(const std::vector<InteractionRecord>& records, int k);

/// Assigns indices by first appearance after sorting by (timestamp, user, item);
/// records without a timestamp sort as timestamp 0.
InteractionDataset build_dataset(const std::vector<InteractionRecord>& records);

/// Per-user random 8:1:1 split. For a user with n items:
/// n_test = n_valid = max(1, floor(n / 10)), n_train = n - n_valid - n_test.
SplitDataset split_per_user(const InteractionDataset& dataset, std::uint64_t seed);

/// 1 - |E| / (|U| |I|).
double sparsity(const InteractionDataset& dataset);
double sparsity(Index num_users, Index num_items, std::size_t num_edges);

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, Index expected_rows,
                                  std::string modality_tag = "other");

// Plain-text artifacts written by `prepare` and read back by training.
void write_index_map(const std::filesystem::path& path, const KeyIndex& index);
KeyIndex read_index_map(const std::filesystem::path& path);
void write_edges(const std::filesystem::path& path, const std::vector<Edge>& edges);
std::vector<Edge> read_edges(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<InteractionRecord>& records);

/// Loads train/valid/test edges and index maps from a prepared dataset directory.
SplitDataset load_split(const std::filesystem::path& dir);

/// Stable 64-bit hash over split sizes and edges, recorded in checkpoints.
std::uint64_t fingerprint(const SplitDataset& split);

}  // namespace bm3
