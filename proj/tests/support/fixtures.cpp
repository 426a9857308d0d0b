#include "support/fixtures.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>

namespace cmn::testing {

InteractionLog log_from_pairs(const std::vector<std::pair<int, int>>& pairs) {
    std::vector<std::pair<std::string, std::string>> raw;
    raw.reserve(pairs.size());
    for (const auto& [u, i] : pairs) raw.emplace_back(std::to_string(u), std::to_string(i));
    return InteractionLog::from_raw_pairs(raw);
}

InteractionLog toy_block_log() {
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < 20; ++u) {
        const int base = u < 10 ? 0 : 10;
        const int skip_a = u % 10;
        const int skip_b = (u + 3) % 10;
        for (int k = 0; k < 10; ++k)
            if (k != skip_a && k != skip_b) pairs.emplace_back(u, base + k);
    }
    return log_from_pairs(pairs);
}

SplitDataset toy_block_split(std::uint64_t seed) {
    SplitOptions options;
    options.seed = seed;
    options.eval_negatives = 0;
    return leave_one_out_split(toy_block_log(), options);
}

void randomize(CmnParameters& params, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    for (auto& ref : parameter_refs(params))
        for (double& v : ref.tensor->values()) v = normal(rng);
}

RandomInstance random_instance(std::uint64_t seed, std::size_t dim, std::size_t hops, std::size_t neighbors,
                               Variant variant, std::size_t users, std::size_t items) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<UserIndex>> lists(items);
    std::vector<UserIndex> pool(users);
    for (std::size_t k = 0; k < users; ++k) pool[k] = static_cast<UserIndex>(k);
    for (auto& list : lists) {
        std::shuffle(pool.begin(), pool.end(), rng);
        list.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(neighbors, users)));
        std::sort(list.begin(), list.end());
    }
    RandomInstance inst;
    inst.index = std::make_shared<NeighborIndex>(std::move(lists));
    inst.params = CmnParameters::zeros(users, items, dim, hops);
    randomize(inst.params, seed + 1);
    inst.config.dim = dim;
    inst.config.hops = hops;
    inst.config.variant = variant;
    inst.users = users;
    inst.items = items;
    return inst;
}

std::vector<Triplet> random_triplets(std::uint64_t seed, std::size_t count, std::size_t users, std::size_t items) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<UserIndex> pick_user(0, static_cast<UserIndex>(users - 1));
    std::uniform_int_distribution<ItemIndex> pick_item(0, static_cast<ItemIndex>(items - 1));
    std::vector<Triplet> out;
    while (out.size() < count) {
        const ItemIndex a = pick_item(rng);
        const ItemIndex b = pick_item(rng);
        if (a == b) continue;
        out.push_back({pick_user(rng), a, b});
    }
    return out;
}

std::vector<std::pair<int, int>> clustered_pairs(std::uint64_t seed, int users, int items, int clusters, int per_user,
                                                 double in_cluster) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution stay(in_cluster);
    const int per_cluster = items / clusters;
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < users; ++u) {
        const int cluster = u % clusters;
        std::set<int> chosen;
        // Popularity skew inside each cluster: low offsets are drawn more often.
        std::geometric_distribution<int> offset(3.0 / per_cluster);
        std::uniform_int_distribution<int> any(0, items - 1);
        while (static_cast<int>(chosen.size()) < per_user) {
            if (stay(rng)) {
                chosen.insert(cluster * per_cluster + offset(rng) % per_cluster);
            } else {
                chosen.insert(any(rng));
            }
        }
        for (int i : chosen) pairs.emplace_back(u, i);
    }
    return pairs;
}

}  // namespace cmn::testing
