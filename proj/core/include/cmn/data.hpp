#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cmn {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;
using Rng = std::mt19937_64;

/// Deduplicated implicit-feedback log with contiguous indices.
///
/// Indices are assigned by sorted raw id (all-digit ids compare numerically,
/// anything else lexicographically), so the same set of raw pairs always
/// produces the same index maps regardless of input order.
class InteractionLog {
public:
    static InteractionLog from_raw_pairs(std::span<const std::pair<std::string, std::string>> raw);

    std::size_t user_count() const noexcept { return user_ids_.size(); }
    std::size_t item_count() const noexcept { return item_ids_.size(); }
    std::size_t pair_count() const noexcept { return pair_count_; }
    double sparsity() const noexcept;

    /// Items of a user, sorted ascending.
    std::span<const ItemIndex> items_of(UserIndex u) const { return items_of_user_[u]; }
    bool contains(UserIndex u, ItemIndex i) const;

    const std::string& user_id(UserIndex u) const { return user_ids_.at(u); }
    const std::string& item_id(ItemIndex i) const { return item_ids_.at(i); }
    std::optional<UserIndex> find_user(const std::string& raw) const;
    std::optional<ItemIndex> find_item(const std::string& raw) const;

    /// One-line summary: "users=P items=Q ratings=N sparsity=..".
    std::string stats_line() const;

private:
    std::vector<std::string> user_ids_;
    std::vector<std::string> item_ids_;
    std::unordered_map<std::string, UserIndex> user_lookup_;
    std::unordered_map<std::string, ItemIndex> item_lookup_;
    std::vector<std::vector<ItemIndex>> items_of_user_;
    std::size_t pair_count_ = 0;
};

/// Reads "raw_user raw_item [extra columns...]" lines (whitespace or tab
/// separated). Extra columns such as ratings are ignored: every listed pair
/// is one implicit positive. Blank lines and '#' comments are skipped.
/// Throws DataError naming the line for malformed lines, and for empty input.
InteractionLog ingest(const std::filesystem::path& path);

/// Keeps a deterministic random fraction of users (for subsampled runs).
InteractionLog subsample_users(const InteractionLog& log, double fraction, std::uint64_t seed);

struct SplitOptions {
    std::uint64_t seed = 1;
    /// Evaluation negatives per user. 0 selects every unobserved item.
    std::size_t eval_negatives = 100;
};

/// Leave-one-out split over an InteractionLog.
class SplitDataset {
public:
    SplitDataset(InteractionLog log, std::vector<std::vector<ItemIndex>> train,
                 std::vector<std::optional<ItemIndex>> validation,
                 std::vector<std::optional<ItemIndex>> test,
                 std::vector<std::vector<ItemIndex>> negatives);

    const InteractionLog& log() const noexcept { return log_; }
    std::size_t user_count() const noexcept { return log_.user_count(); }
    std::size_t item_count() const noexcept { return log_.item_count(); }

    std::span<const ItemIndex> train_items(UserIndex u) const { return train_[u]; }
    bool in_train(UserIndex u, ItemIndex i) const;
    std::size_t train_pair_count() const noexcept { return train_pairs_; }

    std::optional<ItemIndex> validation_item(UserIndex u) const { return validation_[u]; }
    std::optional<ItemIndex> test_item(UserIndex u) const { return test_[u]; }
    /// Frozen evaluation negatives (shared by the validation and test ranking).
    std::span<const ItemIndex> eval_negatives(UserIndex u) const { return negatives_[u]; }

private:
    InteractionLog log_;
    std::vector<std::vector<ItemIndex>> train_;
    std::vector<std::optional<ItemIndex>> validation_;
    std::vector<std::optional<ItemIndex>> test_;
    std::vector<std::vector<ItemIndex>> negatives_;
    std::size_t train_pairs_ = 0;
};

/// Users with >= 3 interactions get a test and a validation item, users with
/// exactly 2 get a test item only, users with 1 stay entirely in train.
/// Throws DataError when a user cannot receive the requested number of
/// distinct unobserved negatives.
SplitDataset leave_one_out_split(const InteractionLog& log, const SplitOptions& options);

/// Writes manifest.txt ("user role item" per line, role in train/val/test)
/// and negatives.txt ("user item item ..." per evaluated user).
void write_split(const SplitDataset& split, const std::filesystem::path& dir);
SplitDataset read_split(const std::filesystem::path& dir);

/// Inverted index item -> train users, each list sorted ascending.
class NeighborIndex {
public:
    NeighborIndex() = default;
    explicit NeighborIndex(std::vector<std::vector<UserIndex>> users_of_item)
        : users_of_item_(std::move(users_of_item)) {}

    std::span<const UserIndex> neighbors(ItemIndex i) const { return users_of_item_.at(i); }
    std::size_t item_count() const noexcept { return users_of_item_.size(); }

    /// Reorders one item's neighbor list (used by permutation-invariance checks).
    void set_neighbors(ItemIndex i, std::vector<UserIndex> users) { users_of_item_.at(i) = std::move(users); }

private:
    std::vector<std::vector<UserIndex>> users_of_item_;
};

NeighborIndex build_neighborhoods(const SplitDataset& split);

struct Triplet {
    UserIndex user;
    ItemIndex positive;
    ItemIndex negative;
    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// neg_ratio triplets per train positive of `user`; negatives are drawn
/// uniformly (with replacement) from items outside the user's train set.
std::vector<Triplet> sample_triplets(const SplitDataset& split, UserIndex user, int neg_ratio, Rng& rng);

/// sample_triplets over every user in index order.
std::vector<Triplet> sample_epoch_triplets(const SplitDataset& split, int neg_ratio, Rng& rng);

/// Shuffles `triplets` in place and partitions it into consecutive batches;
/// the last batch may be partial.
std::vector<std::span<const Triplet>> make_batches(std::vector<Triplet>& triplets, std::size_t batch_size,
                                                   Rng& rng);

}  // namespace cmn
