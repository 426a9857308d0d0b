#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmn/data.hpp"

namespace cmn {

/// Any model's ranking score for (user, item). Must be safe to call
/// concurrently when evaluation runs with more than one thread.
using Scorer = std::function<double(UserIndex, ItemIndex)>;

/// Candidates sorted by descending score, ties broken by ascending item index.
struct RankedList {
    std::vector<ItemIndex> items;
    std::vector<double> scores;
    std::size_t position = 0;  // 1-based rank of the held-out positive
};

/// Throws DataError if the positive also appears among the negatives.
RankedList rank_candidates(const Scorer& scorer, UserIndex user, ItemIndex positive,
                           std::span<const ItemIndex> negatives);

inline int hit_ratio(std::size_t position, std::size_t cutoff) noexcept { return position <= cutoff ? 1 : 0; }

/// Single-relevant-item NDCG: 1/log2(position+1) inside the cutoff, else 0.
double ndcg_single(std::size_t position, std::size_t cutoff) noexcept;

enum class HoldOut { validation, test };

struct UserRecord {
    UserIndex user;
    std::size_t position;
};

struct EvalReport {
    double hr5 = 0.0;
    double hr10 = 0.0;
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    std::size_t user_count = 0;
    std::vector<UserRecord> records;
};

/// Averages the four metrics over the records, in record order.
EvalReport summarize(std::vector<UserRecord> records);

/// Ranks each user's held-out item against its frozen negatives. Users are
/// scored in parallel when threads > 1; aggregation order is fixed.
EvalReport evaluate(const Scorer& scorer, const SplitDataset& split, HoldOut holdout = HoldOut::test,
                    int threads = 1);

/// Plain-text report: a header with the config fingerprint, "metric cutoff
/// value" lines, then "user position" lines with raw user ids.
void write_report(const EvalReport& report, const SplitDataset& split, const std::string& fingerprint,
                  const std::filesystem::path& path);

/// Runs fn(begin, end) over `count` items split into `threads` contiguous chunks.
void parallel_chunks(std::size_t count, int threads, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace cmn
