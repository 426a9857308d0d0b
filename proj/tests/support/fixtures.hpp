#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/model.hpp"
#include "cmn/training.hpp"

namespace cmn::testing {

/// Builds a log from integer (user, item) pairs using their decimal strings
/// as raw ids, so raw id k maps to index k when ids are contiguous.
InteractionLog log_from_pairs(const std::vector<std::pair<int, int>>& pairs);

/// Two disjoint preference blocks: users 0-9 interact with 8 of items 0-9,
/// users 10-19 with 8 of items 10-19.
InteractionLog toy_block_log();

/// Leave-one-out split of the toy blocks, ranking against all unobserved items.
SplitDataset toy_block_split(std::uint64_t seed = 7);

/// A random instance for model-level checks: P users, Q items, each item has
/// exactly `neighbors` distinct raters, plus random He-style parameters.
struct RandomInstance {
    std::shared_ptr<NeighborIndex> index;
    CmnParameters params;
    ModelConfig config;
    std::size_t users = 0;
    std::size_t items = 0;
};

RandomInstance random_instance(std::uint64_t seed, std::size_t dim, std::size_t hops, std::size_t neighbors,
                               Variant variant, std::size_t users = 10, std::size_t items = 6);

/// Random triplets over the instance (negatives need not be unobserved; the
/// objective does not care).
std::vector<Triplet> random_triplets(std::uint64_t seed, std::size_t count, std::size_t users, std::size_t items);

/// Fills every tensor (biases included) with N(0, scale^2) values.
void randomize(CmnParameters& params, std::uint64_t seed, double scale = 0.5);

/// Synthetic implicit-feedback data with latent cluster structure, for
/// pipeline smoke tests: users/items belong to clusters and mostly interact
/// within their own cluster.
std::vector<std::pair<int, int>> clustered_pairs(std::uint64_t seed, int users, int items, int clusters,
                                                 int per_user, double in_cluster = 0.85);

}  // namespace cmn::testing
