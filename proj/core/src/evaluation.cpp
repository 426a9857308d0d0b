#include "cmn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "cmn/checkpoint.hpp"
#include "cmn/errors.hpp"

namespace cmn {

RankedList rank_candidates(const Scorer& scorer, UserIndex user, ItemIndex positive,
                           std::span<const ItemIndex> negatives) {
    if (std::find(negatives.begin(), negatives.end(), positive) != negatives.end()) {
        throw DataError("held-out item " + std::to_string(positive) + " of user " + std::to_string(user) +
                        " appears among its negatives (corrupt split)");
    }
    const std::size_t n = negatives.size() + 1;
    std::vector<ItemIndex> candidates;
    candidates.reserve(n);
    candidates.push_back(positive);
    candidates.insert(candidates.end(), negatives.begin(), negatives.end());
    std::vector<double> scores(n);
    for (std::size_t k = 0; k < n; ++k) scores[k] = scorer(user, candidates[k]);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return candidates[a] < candidates[b];
    });
    RankedList ranked;
    ranked.items.reserve(n);
    ranked.scores.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        ranked.items.push_back(candidates[order[k]]);
        ranked.scores.push_back(scores[order[k]]);
        if (order[k] == 0) ranked.position = k + 1;
    }
    return ranked;
}

double ndcg_single(std::size_t position, std::size_t cutoff) noexcept {
    if (position == 0 || position > cutoff) return 0.0;
    return 1.0 / std::log2(static_cast<double>(position) + 1.0);
}

EvalReport summarize(std::vector<UserRecord> records) {
    EvalReport report;
    for (const auto& r : records) {
        report.hr5 += hit_ratio(r.position, 5);
        report.hr10 += hit_ratio(r.position, 10);
        report.ndcg5 += ndcg_single(r.position, 5);
        report.ndcg10 += ndcg_single(r.position, 10);
    }
    report.user_count = records.size();
    if (!records.empty()) {
        const double n = static_cast<double>(records.size());
        report.hr5 /= n;
        report.hr10 /= n;
        report.ndcg5 /= n;
        report.ndcg10 /= n;
    }
    report.records = std::move(records);
    return report;
}

void parallel_chunks(std::size_t count, int threads, const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1,
                                                        std::max<std::size_t>(count, 1));
    if (workers == 1) {
        fn(0, count);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (count + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = std::min(count, w * chunk);
            const std::size_t end = std::min(count, begin + chunk);
            pool.emplace_back([&fn, &errors, w, begin, end] {
                try {
                    fn(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

EvalReport evaluate(const Scorer& scorer, const SplitDataset& split, HoldOut holdout, int threads) {
    std::vector<UserIndex> users;
    for (UserIndex u = 0; u < split.user_count(); ++u) {
        const auto target = holdout == HoldOut::test ? split.test_item(u) : split.validation_item(u);
        if (target) users.push_back(u);
    }
    std::vector<UserRecord> records(users.size());
    parallel_chunks(users.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const UserIndex u = users[k];
            const ItemIndex target = holdout == HoldOut::test ? *split.test_item(u) : *split.validation_item(u);
            records[k] = {u, rank_candidates(scorer, u, target, split.eval_negatives(u)).position};
        }
    });
    return summarize(std::move(records));
}

void write_report(const EvalReport& report, const SplitDataset& split, const std::string& fingerprint,
                  const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report " + path.string());
    out << "# cmn-report fingerprint=" << fingerprint << " users=" << report.user_count << '\n';
    out << "HR 5 " << format_double(report.hr5) << '\n';
    out << "HR 10 " << format_double(report.hr10) << '\n';
    out << "NDCG 5 " << format_double(report.ndcg5) << '\n';
    out << "NDCG 10 " << format_double(report.ndcg10) << '\n';
    for (const auto& r : report.records) out << split.log().user_id(r.user) << ' ' << r.position << '\n';
}

}  // namespace cmn
