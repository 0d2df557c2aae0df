#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "bm3/data.hpp"
#include "bm3/fmat.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bm3;
using bm3::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<InteractionRecord> records_from(const oracle::EdgeSet& edges) {
  std::vector<InteractionRecord> r;
  for (auto [u, i] : edges) r.push_back({"u" + std::to_string(u), "i" + std::to_string(i), std::nullopt});
  return r;
}

oracle::EdgeSet edges_from(const std::vector<InteractionRecord>& records) {
  oracle::EdgeSet s;
  for (const auto& r : records) s.insert({std::stoi(r.user_key.substr(1)), std::stoi(r.item_key.substr(1))});
  return s;
}

}  // namespace

TEST(LoadInteractions, CollapsesDuplicatesKeepingEarliestTimestamp) {
  TempDir dir("load");
  write(dir.path / "a.tsv", "u1\ti1\t30\nu1\ti2\t10\nu1\ti1\t5\n");
  auto recs = load_interactions(dir.path / "a.tsv");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].item_key, "i1");
  EXPECT_EQ(recs[0].timestamp, 5);
  EXPECT_EQ(recs[1].item_key, "i2");
}

TEST(LoadInteractions, EmptyFileIsAnError) {
  TempDir dir("load");
  write(dir.path / "empty.tsv", "# only a comment\n\n");
  try {
    load_interactions(dir.path / "empty.tsv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty result"), std::string::npos);
  }
}

TEST(LoadInteractions, MalformedLineReportsLineNumber) {
  TempDir dir("load");
  write(dir.path / "bad.tsv", "u1\ti1\nu2\n");
  try {
    load_interactions(dir.path / "bad.tsv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  write(dir.path / "bad_ts.tsv", "u1\ti1\tnoon\n");
  EXPECT_THROW(load_interactions(dir.path / "bad_ts.tsv"), DataError);
  EXPECT_THROW(load_interactions(dir.path / "missing.tsv"), DataError);
}

TEST(LoadInteractions, SkipsCommentsAndCarriageReturns) {
  TempDir dir("load");
  write(dir.path / "c.tsv", "# header\r\nu1\ti1\r\nu2\ti1\t7\r\n");
  auto recs = load_interactions(dir.path / "c.tsv");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].item_key, "i1");
  EXPECT_FALSE(recs[0].timestamp.has_value());
  EXPECT_EQ(recs[1].timestamp, 7);
}

TEST(KCore, FixedPointIsUnchanged) {
  auto recs = records_from({{1, 1}, {1, 2}, {2, 1}, {2, 2}});
  EXPECT_EQ(kcore_filter(recs, 2), recs);
}

TEST(KCore, CascadingDeletionEmptiesGraph) {
  // u2 (deg 1) goes, then i2, then u1, then i1.
  auto recs = records_from({{1, 1}, {1, 2}, {2, 1}});
  EXPECT_TRUE(kcore_filter(recs, 2).empty());
}

TEST(KCore, MatchesSequentialDeletionOracle) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int nu = 2 + static_cast<int>(gen() % 14), ni = 2 + static_cast<int>(gen() % 14);
    const int k = 1 + static_cast<int>(gen() % 4);
    auto edges = bm3::testing::random_edges(nu, ni, 1 + gen() % (nu * ni), gen);
    oracle::EdgeSet set;
    for (auto e : edges) set.insert({static_cast<int>(e.user), static_cast<int>(e.item)});
    auto got = kcore_filter(records_from(set), k);
    EXPECT_EQ(edges_from(got), oracle::kcore(set, k)) << "trial " << trial;
    EXPECT_EQ(kcore_filter(got, k), got) << "not idempotent, trial " << trial;
  }
}

TEST(KCore, FiftyRandomEdgesOnTenByTen) {
  std::mt19937_64 gen(3);
  auto edges = bm3::testing::random_edges(10, 10, 50, gen);
  oracle::EdgeSet set;
  for (auto e : edges) set.insert({static_cast<int>(e.user), static_cast<int>(e.item)});
  EXPECT_EQ(edges_from(kcore_filter(records_from(set), 3)), oracle::kcore(set, 3));
}

TEST(KCore, RejectsNonPositiveK) { EXPECT_THROW(kcore_filter({}, 0), ConfigError); }

TEST(BuildDataset, IndicesFollowTimestampThenKeyOrder) {
  std::vector<InteractionRecord> recs{{"b", "x", 5}, {"a", "y", 5}, {"c", "z", 1}};
  auto ds = build_dataset(recs);
  EXPECT_EQ(ds.users.key(0), "c");
  EXPECT_EQ(ds.users.key(1), "a");
  EXPECT_EQ(ds.users.key(2), "b");
  EXPECT_EQ(ds.items.key(0), "z");
  ASSERT_EQ(ds.edges.size(), 3u);
  EXPECT_EQ(ds.edges[0], (Edge{0, 0}));
  // Same records in another file order give the same maps.
  std::vector<InteractionRecord> shuffled{recs[2], recs[0], recs[1]};
  EXPECT_EQ(build_dataset(shuffled).users.keys(), ds.users.keys());
}

namespace {

InteractionDataset user_with(int n) {
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < n; ++i) recs.push_back({"u", "i" + std::to_string(i), std::nullopt});
  return build_dataset(recs);
}

}  // namespace

TEST(Split, TenInteractionsGiveEightOneOne) {
  auto s = split_per_user(user_with(10), 1);
  EXPECT_EQ(s.train_edges.size(), 8u);
  EXPECT_EQ(s.valid_edges.size(), 1u);
  EXPECT_EQ(s.test_edges.size(), 1u);
}

TEST(Split, FiveInteractionsGiveThreeOneOne) {
  auto s = split_per_user(user_with(5), 1);
  EXPECT_EQ(s.train_edges.size(), 3u);
  EXPECT_EQ(s.valid_edges.size(), 1u);
  EXPECT_EQ(s.test_edges.size(), 1u);
}

TEST(Split, TooFewInteractionsIsAnError) { EXPECT_THROW(split_per_user(user_with(2), 1), DataError); }

TEST(Split, PartitionsEachUserAndObeysRounding) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<InteractionRecord> recs;
    const int nu = 1 + static_cast<int>(gen() % 8);
    for (int u = 0; u < nu; ++u) {
      const int n = 3 + static_cast<int>(gen() % 40);
      for (int i = 0; i < n; ++i) recs.push_back({"u" + std::to_string(u), "i" + std::to_string(i), std::nullopt});
    }
    auto ds = build_dataset(recs);
    const auto seed = gen();
    auto s = split_per_user(ds, seed);
    auto again = split_per_user(ds, seed);
    EXPECT_EQ(s.train_edges, again.train_edges);
    EXPECT_EQ(s.valid_edges, again.valid_edges);
    EXPECT_EQ(s.test_edges, again.test_edges);

    std::vector<Edge> all;
    for (const auto* part : {&s.train_edges, &s.valid_edges, &s.test_edges}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    auto expected = ds.edges;
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(all, expected);

    for (Index u = 0; u < ds.num_users(); ++u) {
      const auto n = static_cast<Index>(s.per_user_train[u].size() + s.per_user_valid[u].size() + s.per_user_test[u].size());
      const Index held = std::max<Index>(1, n / 10);
      EXPECT_EQ(static_cast<Index>(s.per_user_test[u].size()), held);
      EXPECT_EQ(static_cast<Index>(s.per_user_valid[u].size()), held);
    }
  }
}

TEST(Split, DifferentSeedsUsuallyDiffer) {
  auto ds = user_with(40);
  EXPECT_NE(split_per_user(ds, 1).test_edges, split_per_user(ds, 2).test_edges);
}

TEST(Sparsity, MatchesReportedBabyStatistics) {
  // 19,445 users, 7,050 items, 160,792 interactions -> 99.88%.
  EXPECT_NEAR(sparsity(19445, 7050, 160792), 0.9988, 5e-5);
}

TEST(Sparsity, DenseAndNearlyEmpty) {
  EXPECT_DOUBLE_EQ(sparsity(2, 2, 4), 0.0);
  EXPECT_DOUBLE_EQ(sparsity(10, 10, 1), 0.99);
}

TEST(Fmat, ValidFileLoadsWithExpectedShape) {
  TempDir dir("fmat");
  std::mt19937_64 gen(1);
  Matrix m = bm3::testing::random_matrix(12, 7, gen);
  fmat::write(dir.path / "v.fmat", m);
  auto f = load_feature_matrix(dir.path / "v.fmat", 12, "visual");
  EXPECT_EQ(f.modality_tag, "visual");
  EXPECT_EQ(f.rows(), 12);
  EXPECT_EQ(f.dim(), 7);
}

TEST(Fmat, HeaderBytesAreLittleEndian) {
  TempDir dir("fmat");
  Matrix m(1, 2);
  m << 1.0, -2.0;
  fmat::write(dir.path / "h.fmat", m);
  std::ifstream in(dir.path / "h.fmat", std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(b.size(), 24u + 8u);
  const std::vector<unsigned char> header{'F', 'M', 'A', 'T', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_TRUE(std::equal(header.begin(), header.end(), b.begin()));
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  EXPECT_EQ(b[24], 0x00);
  EXPECT_EQ(b[27], 0x3f);
  EXPECT_EQ(b[31], 0xc0);
}

TEST(Fmat, RowMismatchIsAnError) {
  TempDir dir("fmat");
  fmat::write(dir.path / "v.fmat", Matrix::Zero(10, 3));
  try {
    load_feature_matrix(dir.path / "v.fmat", 12);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row mismatch"), std::string::npos);
  }
}

TEST(Fmat, NonFiniteValueNamesItsPosition) {
  TempDir dir("fmat");
  Matrix m = Matrix::Zero(5, 9);
  m(3, 7) = std::nan("");
  fmat::write(dir.path / "nan.fmat", m);
  try {
    load_feature_matrix(dir.path / "nan.fmat", 5);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("(3, 7)"), std::string::npos) << e.what();
  }
}

TEST(Fmat, BadMagicAndTruncation) {
  TempDir dir("fmat");
  write(dir.path / "bad.fmat", std::string("FMAX") + std::string(20, '\0'));
  EXPECT_THROW(fmat::read(dir.path / "bad.fmat"), DataError);
  fmat::write(dir.path / "ok.fmat", Matrix::Ones(4, 4));
  std::filesystem::resize_file(dir.path / "ok.fmat", 30);
  EXPECT_THROW(fmat::read(dir.path / "ok.fmat"), DataError);
}

TEST(Fmat, RoundTripIsBitExactOnBinary32Payload) {
  TempDir dir("fmat");
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m = bm3::testing::random_matrix(1 + gen() % 20, 1 + gen() % 20, gen, 1e3);
    m = m.cast<float>().cast<double>();
    fmat::write(dir.path / "r.fmat", m);
    Matrix back = fmat::read(dir.path / "r.fmat");
    ASSERT_EQ(back.rows(), m.rows());
    EXPECT_TRUE((back.array() == m.array()).all());
  }
}

TEST(IndexFiles, RoundTrip) {
  TempDir dir("idx");
  KeyIndex idx;
  idx.intern("alpha");
  idx.intern("beta gamma");
  write_index_map(dir.path / "m.tsv", idx);
  EXPECT_EQ(read_index_map(dir.path / "m.tsv").keys(), idx.keys());
  std::vector<Edge> edges{{0, 1}, {3, 2}};
  write_edges(dir.path / "e.tsv", edges);
  EXPECT_EQ(read_edges(dir.path / "e.tsv"), edges);
}

TEST(Fingerprint, SensitiveToEdges) {
  auto s = bm3::testing::planted_blocks(2, 3, 5, 1);
  auto t = s;
  std::swap(t.train_edges.front(), t.train_edges.back());
  EXPECT_EQ(fingerprint(s), fingerprint(s));
  EXPECT_NE(fingerprint(s), fingerprint(t));
}
