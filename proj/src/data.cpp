#include "bm3/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "bm3/fmat.hpp"

namespace bm3 {
namespace {

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cols;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string pair_key(const std::string& u, const std::string& i) {
  std::string k;
  k.reserve(u.size() + i.size() + 1);
  k.append(u).push_back('\0');
  k.append(i);
  return k;
}

}  // namespace

Index KeyIndex::intern(const std::string& key) {
  auto [it, inserted] = lookup_.try_emplace(key, static_cast<Index>(keys_.size()));
  if (inserted) keys_.push_back(key);
  return it->second;
}

std::optional<Index> KeyIndex::find(const std::string& key) const {
  auto it = lookup_.find(key);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<InteractionRecord> load_interactions(const std::filesystem::path& path,
                                                 const InteractionFormat& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read interactions file: " + path.string());

  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == format.comment) continue;
    auto cols = split_line(line, format.delimiter);
    if (cols.size() < 2 || cols[0].empty() || cols[1].empty())
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed line (expected user and item columns)");
    InteractionRecord rec{std::string(cols[0]), std::string(cols[1]), std::nullopt};
    if (cols.size() >= 3 && !cols[2].empty()) {
      std::int64_t ts = 0;
      if (!parse_int(cols[2], ts))
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed timestamp '" +
                        std::string(cols[2]) + "'");
      rec.timestamp = ts;
    }
    records.push_back(std::move(rec));
  }
  records = deduplicate(records);
  if (records.empty()) throw DataError("empty result: no interactions in " + path.string());
  return records;
}

std::vector<InteractionRecord> deduplicate(const std::vector<InteractionRecord>& records) {
  std::vector<InteractionRecord> out;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& rec : records) {
    auto [it, inserted] = seen.try_emplace(pair_key(rec.user_key, rec.item_key), out.size());
    if (inserted) {
      out.push_back(rec);
      continue;
    }
    auto& kept = out[it->second];
    if (rec.timestamp && (!kept.timestamp || *rec.timestamp < *kept.timestamp)) kept.timestamp = rec.timestamp;
  }
  return out;
}

std::vector<InteractionRecord> kcore_filter(const std::vector<InteractionRecord>& records, int k) {
  if (k < 1) throw ConfigError("k-core requires k >= 1");
  std::vector<char> alive(records.size(), 1);
  std::unordered_map<std::string, int> user_deg, item_deg;
  for (const auto& r : records) {
    ++user_deg[r.user_key];
    ++item_deg[r.item_key];
  }
  while (true) {
    std::unordered_set<std::string> bad_users, bad_items;
    for (const auto& [key, deg] : user_deg)
      if (deg > 0 && deg < k) bad_users.insert(key);
    for (const auto& [key, deg] : item_deg)
      if (deg > 0 && deg < k) bad_items.insert(key);
    if (bad_users.empty() && bad_items.empty()) break;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!alive[i]) continue;
      const auto& r = records[i];
      if (bad_users.count(r.user_key) || bad_items.count(r.item_key)) {
        alive[i] = 0;
        --user_deg[r.user_key];
        --item_deg[r.item_key];
      }
    }
  }
  std::vector<InteractionRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (alive[i]) out.push_back(records[i]);
  return out;
}

InteractionDataset build_dataset(const std::vector<InteractionRecord>& records) {
  std::vector<const InteractionRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    auto ta = a->timestamp.value_or(0), tb = b->timestamp.value_or(0);
    if (ta != tb) return ta < tb;
    if (a->user_key != b->user_key) return a->user_key < b->user_key;
    return a->item_key < b->item_key;
  });

  InteractionDataset ds;
  std::unordered_set<std::string> seen;
  for (const auto* r : order) {
    if (!seen.insert(pair_key(r->user_key, r->item_key)).second) continue;
    ds.edges.push_back({ds.users.intern(r->user_key), ds.items.intern(r->item_key)});
  }
  if (ds.num_users() == 0 || ds.num_items() == 0) throw DataError("dataset is empty after filtering");
  return ds;
}

void SplitDataset::index_per_user() {
  per_user_train.assign(static_cast<std::size_t>(num_users), {});
  per_user_valid.assign(static_cast<std::size_t>(num_users), {});
  per_user_test.assign(static_cast<std::size_t>(num_users), {});
  auto fill = [this](const std::vector<Edge>& edges, std::vector<std::vector<Index>>& lists) {
    for (const auto& e : edges) {
      if (e.user < 0 || e.user >= num_users || e.item < 0 || e.item >= num_items)
        throw DataError("edge (" + std::to_string(e.user) + ", " + std::to_string(e.item) + ") out of range");
      lists[static_cast<std::size_t>(e.user)].push_back(e.item);
    }
    for (auto& l : lists) std::sort(l.begin(), l.end());
  };
  fill(train_edges, per_user_train);
  fill(valid_edges, per_user_valid);
  fill(test_edges, per_user_test);
}

SplitDataset split_per_user(const InteractionDataset& dataset, std::uint64_t seed) {
  std::vector<std::vector<Index>> items(static_cast<std::size_t>(dataset.num_users()));
  for (const auto& e : dataset.edges) items[static_cast<std::size_t>(e.user)].push_back(e.item);

  SplitDataset split;
  split.num_users = dataset.num_users();
  split.num_items = dataset.num_items();
  Rng rng(seed);
  for (Index u = 0; u < dataset.num_users(); ++u) {
    auto& list = items[static_cast<std::size_t>(u)];
    const auto n = static_cast<Index>(list.size());
    if (n < 3)
      throw DataError("user '" + dataset.users.key(u) + "' has " + std::to_string(n) +
                      " interactions; at least 3 are needed for a train/valid/test split");
    std::sort(list.begin(), list.end());
    rng.shuffle(list);
    const Index n_held = std::max<Index>(1, n / 10);
    for (Index j = 0; j < n; ++j) {
      Edge e{u, list[static_cast<std::size_t>(j)]};
      if (j < n_held)
        split.test_edges.push_back(e);
      else if (j < 2 * n_held)
        split.valid_edges.push_back(e);
      else
        split.train_edges.push_back(e);
    }
  }
  split.index_per_user();
  return split;
}

double sparsity(Index num_users, Index num_items, std::size_t num_edges) {
  return 1.0 - static_cast<double>(num_edges) /
                   (static_cast<double>(num_users) * static_cast<double>(num_items));
}

double sparsity(const InteractionDataset& dataset) {
  return sparsity(dataset.num_users(), dataset.num_items(), dataset.edges.size());
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, Index expected_rows,
                                  std::string modality_tag) {
  Matrix data = fmat::read(path);
  if (data.rows() != expected_rows)
    throw DataError("row mismatch in " + path.string() + ": file has " + std::to_string(data.rows()) +
                    " rows, expected " + std::to_string(expected_rows));
  return FeatureMatrix{std::move(modality_tag), std::move(data)};
}

void write_index_map(const std::filesystem::path& path, const KeyIndex& index) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (Index i = 0; i < index.size(); ++i) out << i << '\t' << index.key(i) << '\n';
}

KeyIndex read_index_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read index map: " + path.string());
  KeyIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    Index idx = -1;
    if (tab == std::string::npos || !parse_int(std::string_view(line).substr(0, tab), idx) ||
        idx != index.size())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed index-map line");
    index.intern(line.substr(tab + 1));
  }
  return index;
}

void write_edges(const std::filesystem::path& path, const std::vector<Edge>& edges) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : edges) out << e.user << '\t' << e.item << '\n';
}

std::vector<Edge> read_edges(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read edge file: " + path.string());
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_line(line, '\t');
    Edge e;
    if (cols.size() != 2 || !parse_int(cols[0], e.user) || !parse_int(cols[1], e.item))
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed edge line");
    edges.push_back(e);
  }
  return edges;
}

void write_records(const std::filesystem::path& path, const std::vector<InteractionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    out << r.user_key << '\t' << r.item_key;
    if (r.timestamp) out << '\t' << *r.timestamp;
    out << '\n';
  }
}

SplitDataset load_split(const std::filesystem::path& dir) {
  SplitDataset split;
  split.num_users = read_index_map(dir / "user_index.tsv").size();
  split.num_items = read_index_map(dir / "item_index.tsv").size();
  split.train_edges = read_edges(dir / "train.tsv");
  split.valid_edges = read_edges(dir / "valid.tsv");
  split.test_edges = read_edges(dir / "test.tsv");
  split.index_per_user();
  return split;
}

std::uint64_t fingerprint(const SplitDataset& split) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(split.num_users));
  mix(static_cast<std::uint64_t>(split.num_items));
  for (const auto* part : {&split.train_edges, &split.valid_edges, &split.test_edges}) {
    mix(part->size());
    for (const auto& e : *part) {
      mix(static_cast<std::uint64_t>(e.user));
      mix(static_cast<std::uint64_t>(e.item));
    }
  }
  return h;
}

}  // namespace bm3
