#include "cmn/data.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "cmn/errors.hpp"

namespace cmn {
namespace {

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

// Numeric-aware ordering so "2" sorts before "10" for integer ids.
bool raw_id_less(const std::string& a, const std::string& b) {
    if (all_digits(a) && all_digits(b)) {
        const auto strip = [](const std::string& s) {
            const auto first = s.find_first_not_of('0');
            return first == std::string::npos ? std::string_view{} : std::string_view(s).substr(first);
        };
        const auto sa = strip(a);
        const auto sb = strip(b);
        if (sa.size() != sb.size()) return sa.size() < sb.size();
        if (sa != sb) return sa < sb;
    }
    return a < b;
}

std::vector<std::string> sorted_unique(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end(), raw_id_less);
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace

InteractionLog InteractionLog::from_raw_pairs(std::span<const std::pair<std::string, std::string>> raw) {
    InteractionLog log;
    std::vector<std::string> users;
    std::vector<std::string> items;
    users.reserve(raw.size());
    items.reserve(raw.size());
    for (const auto& [u, i] : raw) {
        users.push_back(u);
        items.push_back(i);
    }
    log.user_ids_ = sorted_unique(std::move(users));
    log.item_ids_ = sorted_unique(std::move(items));
    for (std::size_t k = 0; k < log.user_ids_.size(); ++k)
        log.user_lookup_.emplace(log.user_ids_[k], static_cast<UserIndex>(k));
    for (std::size_t k = 0; k < log.item_ids_.size(); ++k)
        log.item_lookup_.emplace(log.item_ids_[k], static_cast<ItemIndex>(k));

    log.items_of_user_.assign(log.user_ids_.size(), {});
    for (const auto& [u, i] : raw)
        log.items_of_user_[log.user_lookup_.at(u)].push_back(log.item_lookup_.at(i));
    for (auto& items_of : log.items_of_user_) {
        std::sort(items_of.begin(), items_of.end());
        items_of.erase(std::unique(items_of.begin(), items_of.end()), items_of.end());
        log.pair_count_ += items_of.size();
    }
    return log;
}

double InteractionLog::sparsity() const noexcept {
    const double cells = static_cast<double>(user_count()) * static_cast<double>(item_count());
    return cells == 0.0 ? 0.0 : 1.0 - static_cast<double>(pair_count_) / cells;
}

bool InteractionLog::contains(UserIndex u, ItemIndex i) const {
    const auto& items = items_of_user_[u];
    return std::binary_search(items.begin(), items.end(), i);
}

std::optional<UserIndex> InteractionLog::find_user(const std::string& raw) const {
    if (auto it = user_lookup_.find(raw); it != user_lookup_.end()) return it->second;
    return std::nullopt;
}

std::optional<ItemIndex> InteractionLog::find_item(const std::string& raw) const {
    if (auto it = item_lookup_.find(raw); it != item_lookup_.end()) return it->second;
    return std::nullopt;
}

std::string InteractionLog::stats_line() const {
    std::ostringstream out;
    out << "users=" << user_count() << " items=" << item_count() << " ratings=" << pair_count()
        << " sparsity=" << std::fixed << std::setprecision(4) << 100.0 * sparsity() << "%";
    return out.str();
}

InteractionLog ingest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open interaction file: " + path.string());
    std::vector<std::pair<std::string, std::string>> raw;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        std::string user;
        std::string item;
        if (!(fields >> user >> item)) {
            throw DataError(path.string() + ":" + std::to_string(line_number) +
                            ": expected 'user item [extra columns]'");
        }
        raw.emplace_back(std::move(user), std::move(item));
    }
    if (raw.empty()) throw DataError("interaction file has no records: " + path.string());
    return InteractionLog::from_raw_pairs(raw);
}

InteractionLog subsample_users(const InteractionLog& log, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("user fraction must be in (0, 1]");
    Rng rng(seed);
    std::bernoulli_distribution keep(fraction);
    std::vector<std::pair<std::string, std::string>> raw;
    for (UserIndex u = 0; u < log.user_count(); ++u) {
        if (!keep(rng)) continue;
        for (ItemIndex i : log.items_of(u)) raw.emplace_back(log.user_id(u), log.item_id(i));
    }
    if (raw.empty()) throw DataError("user subsample is empty; increase the fraction");
    return InteractionLog::from_raw_pairs(raw);
}

SplitDataset::SplitDataset(InteractionLog log, std::vector<std::vector<ItemIndex>> train,
                           std::vector<std::optional<ItemIndex>> validation,
                           std::vector<std::optional<ItemIndex>> test,
                           std::vector<std::vector<ItemIndex>> negatives)
    : log_(std::move(log)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      test_(std::move(test)),
      negatives_(std::move(negatives)) {
    const std::size_t p = log_.user_count();
    if (train_.size() != p || validation_.size() != p || test_.size() != p || negatives_.size() != p) {
        throw ShapeError("split tables do not match the user count " + std::to_string(p));
    }
    for (auto& items : train_) {
        std::sort(items.begin(), items.end());
        train_pairs_ += items.size();
    }
}

bool SplitDataset::in_train(UserIndex u, ItemIndex i) const {
    const auto& items = train_[u];
    return std::binary_search(items.begin(), items.end(), i);
}

namespace {

std::vector<ItemIndex> draw_negatives(const InteractionLog& log, UserIndex u, std::size_t count, Rng& rng) {
    const std::size_t q = log.item_count();
    const std::size_t observed = log.items_of(u).size();
    const std::size_t available = q - observed;
    if (count == 0) {
        std::vector<ItemIndex> all;
        all.reserve(available);
        for (ItemIndex i = 0; i < q; ++i)
            if (!log.contains(u, i)) all.push_back(i);
        return all;
    }
    if (count > available) {
        throw DataError("user " + log.user_id(u) + " has only " + std::to_string(available) +
                        " unobserved items; cannot draw " + std::to_string(count) + " evaluation negatives");
    }
    std::vector<ItemIndex> drawn;
    drawn.reserve(count);
    if (2 * count > available) {
        // Dense case: partial Fisher-Yates over the complement.
        std::vector<ItemIndex> pool;
        pool.reserve(available);
        for (ItemIndex i = 0; i < q; ++i)
            if (!log.contains(u, i)) pool.push_back(i);
        for (std::size_t k = 0; k < count; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
            std::swap(pool[k], pool[pick(rng)]);
            drawn.push_back(pool[k]);
        }
        return drawn;
    }
    std::unordered_set<ItemIndex> seen;
    std::uniform_int_distribution<ItemIndex> pick(0, static_cast<ItemIndex>(q - 1));
    while (drawn.size() < count) {
        const ItemIndex i = pick(rng);
        if (log.contains(u, i) || !seen.insert(i).second) continue;
        drawn.push_back(i);
    }
    return drawn;
}

}  // namespace

SplitDataset leave_one_out_split(const InteractionLog& log, const SplitOptions& options) {
    const std::size_t p = log.user_count();
    std::vector<std::vector<ItemIndex>> train(p);
    std::vector<std::optional<ItemIndex>> validation(p);
    std::vector<std::optional<ItemIndex>> test(p);
    std::vector<std::vector<ItemIndex>> negatives(p);
    Rng rng(options.seed);
    for (UserIndex u = 0; u < p; ++u) {
        std::vector<ItemIndex> items(log.items_of(u).begin(), log.items_of(u).end());
        if (items.size() >= 2) {
            for (std::size_t k = 0; k + 1 < items.size() && k < 2; ++k) {
                std::uniform_int_distribution<std::size_t> pick(k, items.size() - 1);
                std::swap(items[k], items[pick(rng)]);
            }
            test[u] = items[0];
            std::size_t held = 1;
            if (items.size() >= 3) {
                validation[u] = items[1];
                held = 2;
            }
            train[u].assign(items.begin() + static_cast<std::ptrdiff_t>(held), items.end());
            negatives[u] = draw_negatives(log, u, options.eval_negatives, rng);
        } else {
            train[u] = std::move(items);
        }
    }
    return SplitDataset(log, std::move(train), std::move(validation), std::move(test), std::move(negatives));
}

void write_split(const SplitDataset& split, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& log = split.log();
    {
        std::ofstream out(dir / "manifest.txt");
        if (!out) throw DataError("cannot write " + (dir / "manifest.txt").string());
        for (UserIndex u = 0; u < split.user_count(); ++u) {
            const auto& user = log.user_id(u);
            for (ItemIndex i : split.train_items(u)) out << user << "\ttrain\t" << log.item_id(i) << '\n';
            if (auto v = split.validation_item(u)) out << user << "\tval\t" << log.item_id(*v) << '\n';
            if (auto t = split.test_item(u)) out << user << "\ttest\t" << log.item_id(*t) << '\n';
        }
    }
    std::ofstream out(dir / "negatives.txt");
    if (!out) throw DataError("cannot write " + (dir / "negatives.txt").string());
    for (UserIndex u = 0; u < split.user_count(); ++u) {
        if (!split.test_item(u)) continue;
        out << log.user_id(u);
        for (ItemIndex i : split.eval_negatives(u)) out << '\t' << log.item_id(i);
        out << '\n';
    }
}

SplitDataset read_split(const std::filesystem::path& dir) {
    struct Record {
        std::string user, role, item;
    };
    std::vector<Record> records;
    {
        const auto path = dir / "manifest.txt";
        std::ifstream in(path);
        if (!in) throw DataError("cannot open split manifest: " + path.string());
        std::string line;
        std::size_t line_number = 0;
        while (std::getline(in, line)) {
            ++line_number;
            if (line.empty()) continue;
            std::istringstream fields(line);
            Record r;
            if (!(fields >> r.user >> r.role >> r.item) ||
                (r.role != "train" && r.role != "val" && r.role != "test")) {
                throw DataError(path.string() + ":" + std::to_string(line_number) + ": malformed manifest record");
            }
            records.push_back(std::move(r));
        }
        if (records.empty()) throw DataError("split manifest is empty: " + path.string());
    }
    std::vector<std::pair<std::string, std::string>> raw;
    raw.reserve(records.size());
    for (const auto& r : records) raw.emplace_back(r.user, r.item);
    InteractionLog log = InteractionLog::from_raw_pairs(raw);

    const std::size_t p = log.user_count();
    std::vector<std::vector<ItemIndex>> train(p);
    std::vector<std::optional<ItemIndex>> validation(p);
    std::vector<std::optional<ItemIndex>> test(p);
    std::vector<std::vector<ItemIndex>> negatives(p);
    for (const auto& r : records) {
        const UserIndex u = *log.find_user(r.user);
        const ItemIndex i = *log.find_item(r.item);
        if (r.role == "train") {
            train[u].push_back(i);
        } else if (r.role == "val") {
            validation[u] = i;
        } else {
            test[u] = i;
        }
    }

    const auto path = dir / "negatives.txt";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open negatives file: " + path.string());
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string user;
        fields >> user;
        const auto u = log.find_user(user);
        if (!u) throw DataError(path.string() + ":" + std::to_string(line_number) + ": unknown user " + user);
        std::string item;
        while (fields >> item) {
            const auto i = log.find_item(item);
            if (!i) throw DataError(path.string() + ":" + std::to_string(line_number) + ": unknown item " + item);
            negatives[*u].push_back(*i);
        }
    }
    return SplitDataset(std::move(log), std::move(train), std::move(validation), std::move(test),
                        std::move(negatives));
}

NeighborIndex build_neighborhoods(const SplitDataset& split) {
    std::vector<std::vector<UserIndex>> users_of_item(split.item_count());
    // Users are visited in ascending order, so every list comes out sorted.
    for (UserIndex u = 0; u < split.user_count(); ++u)
        for (ItemIndex i : split.train_items(u)) users_of_item[i].push_back(u);
    return NeighborIndex(std::move(users_of_item));
}

std::vector<Triplet> sample_triplets(const SplitDataset& split, UserIndex user, int neg_ratio, Rng& rng) {
    if (neg_ratio < 1) throw ConfigError("neg_ratio must be >= 1");
    const auto positives = split.train_items(user);
    std::vector<Triplet> out;
    if (positives.empty()) return out;
    const std::size_t q = split.item_count();
    if (positives.size() >= q) {
        throw DataError("user " + split.log().user_id(user) + " has no unobserved items to sample");
    }
    std::uniform_int_distribution<ItemIndex> pick(0, static_cast<ItemIndex>(q - 1));
    out.reserve(positives.size() * static_cast<std::size_t>(neg_ratio));
    for (ItemIndex pos : positives) {
        for (int k = 0; k < neg_ratio; ++k) {
            ItemIndex neg;
            do {
                neg = pick(rng);
            } while (split.in_train(user, neg));
            out.push_back({user, pos, neg});
        }
    }
    return out;
}

std::vector<Triplet> sample_epoch_triplets(const SplitDataset& split, int neg_ratio, Rng& rng) {
    std::vector<Triplet> out;
    out.reserve(split.train_pair_count() * static_cast<std::size_t>(std::max(neg_ratio, 1)));
    for (UserIndex u = 0; u < split.user_count(); ++u) {
        auto part = sample_triplets(split, u, neg_ratio, rng);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<std::span<const Triplet>> make_batches(std::vector<Triplet>& triplets, std::size_t batch_size,
                                                   Rng& rng) {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    std::shuffle(triplets.begin(), triplets.end(), rng);
    std::vector<std::span<const Triplet>> batches;
    const std::span<const Triplet> all(triplets);
    for (std::size_t start = 0; start < all.size(); start += batch_size)
        batches.push_back(all.subspan(start, std::min(batch_size, all.size() - start)));
    return batches;
}

}  // namespace cmn
