#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "cmn/data.hpp"
#include "cmn/errors.hpp"
#include "support/fixtures.hpp"

using namespace cmn;
using cmn::testing::clustered_pairs;
using cmn::testing::log_from_pairs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "cmn_data_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    return path;
}

SplitDataset clustered_split(std::uint64_t seed, std::size_t negatives = 100) {
    SplitOptions options;
    options.seed = seed;
    options.eval_negatives = negatives;
    return leave_one_out_split(log_from_pairs(clustered_pairs(9, 200, 400, 8, 12)), options);
}

}  // namespace

TEST(Ingest, ReadsPairsSkipsCommentsAndDeduplicates) {
    const auto dir = scratch("ingest");
    const auto path = write_file(dir / "log.txt",
                                 "# header\n"
                                 "u1 a 5 123\n"
                                 "\n"
                                 "u1\ta\n"
                                 "u2 b\r\n"
                                 "u2 a\n");
    const InteractionLog log = ingest(path);
    EXPECT_EQ(log.user_count(), 2u);
    EXPECT_EQ(log.item_count(), 2u);
    EXPECT_EQ(log.pair_count(), 3u);
    EXPECT_NEAR(log.sparsity(), 0.25, 1e-15);
    const UserIndex u1 = *log.find_user("u1");
    const ItemIndex a = *log.find_item("a");
    EXPECT_TRUE(log.contains(u1, a));
    EXPECT_FALSE(log.contains(u1, *log.find_item("b")));
    EXPECT_FALSE(log.find_user("u3").has_value());
    EXPECT_EQ(log.stats_line(), "users=2 items=2 ratings=3 sparsity=25.0000%");
}

TEST(Ingest, NumericIdsKeepNumericOrder) {
    const InteractionLog log = log_from_pairs({{10, 2}, {2, 10}, {1, 1}});
    EXPECT_EQ(log.user_id(0), "1");
    EXPECT_EQ(log.user_id(1), "2");
    EXPECT_EQ(log.user_id(2), "10");
    EXPECT_EQ(log.item_id(2), "10");
}

TEST(Ingest, MalformedLineReportsLineNumber) {
    const auto dir = scratch("malformed");
    const auto path = write_file(dir / "log.txt", "u1 a\nu2 b\nlonely\n");
    try {
        ingest(path);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
    }
}

TEST(Ingest, MissingOrEmptyFileRaises) {
    const auto dir = scratch("missing");
    EXPECT_THROW(ingest(dir / "absent.txt"), DataError);
    EXPECT_THROW(ingest(write_file(dir / "empty.txt", "# only a comment\n\n")), DataError);
}

TEST(Split, AssignsHoldOutsByInteractionCount) {
    // u0: 1 interaction, u1: 2, u2: 3, u3: 5
    const InteractionLog log = log_from_pairs(
        {{0, 0}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {2, 2}, {3, 0}, {3, 1}, {3, 2}, {3, 3}, {3, 4}});
    SplitOptions options;
    options.eval_negatives = 0;
    const SplitDataset s = leave_one_out_split(log, options);
    EXPECT_EQ(s.train_items(0).size(), 1u);
    EXPECT_FALSE(s.test_item(0).has_value());
    EXPECT_FALSE(s.validation_item(0).has_value());
    EXPECT_TRUE(s.test_item(1).has_value());
    EXPECT_FALSE(s.validation_item(1).has_value());
    EXPECT_EQ(s.train_items(1).size(), 1u);
    EXPECT_TRUE(s.test_item(2).has_value());
    EXPECT_TRUE(s.validation_item(2).has_value());
    EXPECT_EQ(s.train_items(2).size(), 1u);
    EXPECT_EQ(s.train_items(3).size(), 3u);
    EXPECT_EQ(s.train_pair_count(), 1u + 1u + 1u + 3u);
    // All unobserved items when the negative count is zero.
    EXPECT_EQ(s.eval_negatives(1).size(), 3u);
    EXPECT_EQ(s.eval_negatives(3).size(), 0u);
}

TEST(Split, HoldOutsAreDisjointFromTrainAndNegativesAreUnobserved) {
    const SplitDataset s = clustered_split(4);
    const auto& log = s.log();
    std::size_t evaluated = 0;
    for (UserIndex u = 0; u < s.user_count(); ++u) {
        const auto t = s.test_item(u);
        const auto v = s.validation_item(u);
        ASSERT_TRUE(t.has_value());
        ++evaluated;
        EXPECT_FALSE(s.in_train(u, *t));
        if (v) {
            EXPECT_FALSE(s.in_train(u, *v));
            EXPECT_NE(*v, *t);
        }
        const auto negs = s.eval_negatives(u);
        EXPECT_EQ(negs.size(), 100u);
        std::set<ItemIndex> distinct(negs.begin(), negs.end());
        EXPECT_EQ(distinct.size(), negs.size());
        for (ItemIndex i : negs) EXPECT_FALSE(log.contains(u, i));
        EXPECT_EQ(s.train_items(u).size() + 1 + (v ? 1 : 0), log.items_of(u).size());
    }
    EXPECT_EQ(evaluated, s.user_count());
}

TEST(Split, IsDeterministicForASeed) {
    const SplitDataset a = clustered_split(4);
    const SplitDataset b = clustered_split(4);
    const SplitDataset c = clustered_split(5);
    bool differs = false;
    for (UserIndex u = 0; u < a.user_count(); ++u) {
        EXPECT_EQ(a.test_item(u), b.test_item(u));
        EXPECT_EQ(a.validation_item(u), b.validation_item(u));
        EXPECT_TRUE(std::ranges::equal(a.eval_negatives(u), b.eval_negatives(u)));
        differs = differs || a.test_item(u) != c.test_item(u);
    }
    EXPECT_TRUE(differs);
}

TEST(Split, TooFewUnobservedItemsRaises) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 50; ++i) pairs.emplace_back(0, i);
    for (int i = 0; i < 3; ++i) pairs.emplace_back(1, i);
    SplitOptions options;
    EXPECT_THROW(leave_one_out_split(log_from_pairs(pairs), options), DataError);
}

TEST(Split, DenseNegativePoolStillDrawsDistinctItems) {
    // 120 items, each also held by a single-interaction user; user 0 leaves
    // 105 unobserved, so 100 negatives come from a nearly exhausted pool.
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 15; ++i) pairs.emplace_back(0, i);
    for (int i = 0; i < 120; ++i) pairs.emplace_back(1 + i, i);
    const SplitDataset s = leave_one_out_split(log_from_pairs(pairs), SplitOptions{});
    const auto negs = s.eval_negatives(0);
    EXPECT_EQ(std::set<ItemIndex>(negs.begin(), negs.end()).size(), 100u);
    for (ItemIndex i : negs) EXPECT_GE(i, 15u);
    EXPECT_TRUE(s.eval_negatives(1).empty());
}

TEST(Split, ManifestRoundTripIsExact) {
    const SplitDataset s = clustered_split(8);
    const auto dir = scratch("roundtrip");
    write_split(s, dir);
    const SplitDataset r = read_split(dir);
    ASSERT_EQ(r.user_count(), s.user_count());
    ASSERT_EQ(r.item_count(), s.item_count());
    for (UserIndex u = 0; u < s.user_count(); ++u) {
        EXPECT_EQ(r.log().user_id(u), s.log().user_id(u));
        EXPECT_TRUE(std::ranges::equal(r.train_items(u), s.train_items(u)));
        EXPECT_EQ(r.test_item(u), s.test_item(u));
        EXPECT_EQ(r.validation_item(u), s.validation_item(u));
        EXPECT_TRUE(std::ranges::equal(r.eval_negatives(u), s.eval_negatives(u)));
    }
    write_split(r, scratch("roundtrip2"));
    std::ifstream a(dir / "manifest.txt");
    std::ifstream b(fs::temp_directory_path() / "cmn_data_test" / "roundtrip2" / "manifest.txt");
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Split, CorruptManifestRaises) {
    const auto dir = scratch("corrupt");
    write_file(dir / "manifest.txt", "1\ttrain\t2\n1\tbogus\t3\n");
    write_file(dir / "negatives.txt", "");
    EXPECT_THROW(read_split(dir), DataError);
}

TEST(Neighborhoods, MatchBruteForce) {
    const SplitDataset s = clustered_split(2);
    const NeighborIndex index = build_neighborhoods(s);
    ASSERT_EQ(index.item_count(), s.item_count());
    for (ItemIndex i = 0; i < s.item_count(); ++i) {
        std::vector<UserIndex> expected;
        for (UserIndex u = 0; u < s.user_count(); ++u)
            if (s.in_train(u, i)) expected.push_back(u);
        EXPECT_TRUE(std::ranges::equal(index.neighbors(i), expected)) << "item " << i;
    }
}

TEST(Triplets, CountsAndValidity) {
    // One user with ten train items among fifty.
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 10; ++i) pairs.emplace_back(0, i);
    for (int i = 0; i < 50; ++i) pairs.emplace_back(1, i);
    const InteractionLog log = log_from_pairs(pairs);
    std::vector<std::vector<ItemIndex>> train{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {}};
    for (ItemIndex i = 0; i < 50; ++i) train[1].push_back(i);
    train[1].pop_back();
    const SplitDataset s(log, train, {std::nullopt, std::nullopt}, {std::nullopt, ItemIndex{49}}, {{}, {}});
    Rng rng(3);
    const auto triplets = sample_triplets(s, 0, 4, rng);
    EXPECT_EQ(triplets.size(), 40u);
    for (const Triplet& t : triplets) {
        EXPECT_TRUE(s.in_train(0, t.positive));
        EXPECT_FALSE(s.in_train(0, t.negative));
    }
    EXPECT_THROW(sample_triplets(s, 0, 0, rng), ConfigError);
    // User 1 only leaves its held-out item unobserved in train, so it is the only negative.
    for (const Triplet& t : sample_triplets(s, 1, 2, rng)) EXPECT_EQ(t.negative, 49u);
}

TEST(Triplets, NoUnobservedItemRaises) {
    const InteractionLog log = log_from_pairs({{0, 0}, {0, 1}});
    const SplitDataset s(log, {{0, 1}}, {std::nullopt}, {std::nullopt}, {{}});
    Rng rng(1);
    EXPECT_THROW(sample_triplets(s, 0, 1, rng), DataError);
}

TEST(Triplets, EpochSamplingIsSeededAndBatchesPartition) {
    const SplitDataset s = clustered_split(1);
    Rng a(11);
    Rng b(11);
    auto ta = sample_epoch_triplets(s, 4, a);
    auto tb = sample_epoch_triplets(s, 4, b);
    EXPECT_EQ(ta, tb);
    EXPECT_EQ(ta.size(), 4 * s.train_pair_count());

    std::vector<Triplet> three(300, Triplet{0, 1, 2});
    for (std::size_t k = 0; k < three.size(); ++k) three[k].user = static_cast<UserIndex>(k);
    Rng rng(2);
    const auto batches = make_batches(three, 128, rng);
    ASSERT_EQ(batches.size(), 3u);
    EXPECT_EQ(batches[0].size(), 128u);
    EXPECT_EQ(batches[1].size(), 128u);
    EXPECT_EQ(batches[2].size(), 44u);
    std::set<UserIndex> seen;
    for (const auto& batch : batches)
        for (const Triplet& t : batch) seen.insert(t.user);
    EXPECT_EQ(seen.size(), 300u);
    EXPECT_THROW(make_batches(three, 0, rng), ConfigError);
}

TEST(Subsample, KeepsWholeUsersDeterministically) {
    const InteractionLog log = log_from_pairs(clustered_pairs(3, 500, 300, 5, 6));
    const InteractionLog a = subsample_users(log, 0.1, 4);
    const InteractionLog b = subsample_users(log, 0.1, 4);
    EXPECT_EQ(a.pair_count(), b.pair_count());
    EXPECT_GT(a.user_count(), 25u);
    EXPECT_LT(a.user_count(), 80u);
    EXPECT_EQ(a.pair_count(), 6 * a.user_count());
    EXPECT_THROW(subsample_users(log, 0.0, 1), ConfigError);
    EXPECT_THROW(subsample_users(log, 1.5, 1), ConfigError);
}
