#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/evaluation.hpp"
#include "cmn/model.hpp"
#include "cmn/training.hpp"

namespace {

// Synthetic log: each user rates `per_user` random items.
cmn::SplitDataset synthetic_split(int users, int items, int per_user) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pick(0, items - 1);
    std::vector<std::pair<std::string, std::string>> raw;
    for (int u = 0; u < users; ++u)
        for (int k = 0; k < per_user; ++k) raw.emplace_back(std::to_string(u), std::to_string(pick(rng)));
    cmn::SplitOptions options;
    options.seed = 3;
    return cmn::leave_one_out_split(cmn::InteractionLog::from_raw_pairs(raw), options);
}

struct Fixture {
    cmn::SplitDataset split = synthetic_split(1000, 1500, 20);
    std::shared_ptr<cmn::NeighborIndex> index = std::make_shared<cmn::NeighborIndex>(cmn::build_neighborhoods(split));
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

cmn::CmnModel make_model(std::size_t hops) {
    auto& f = fixture();
    cmn::ModelConfig config;
    config.dim = 50;
    config.hops = hops;
    return cmn::CmnModel(
        cmn::CmnParameters::initialized(f.split.user_count(), f.split.item_count(), config.dim, hops, 5), config,
        f.index);
}

void BM_Forward(benchmark::State& state) {
    auto model = make_model(static_cast<std::size_t>(state.range(0)));
    cmn::ItemIndex i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.score(static_cast<cmn::UserIndex>(i % 1000), i % 1500));
        ++i;
    }
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(2)->Arg(3);

void BM_BatchGradients(benchmark::State& state) {
    auto model = make_model(2);
    cmn::Rng rng(1);
    auto triplets = cmn::sample_epoch_triplets(fixture().split, 4, rng);
    triplets.resize(128);
    for (auto _ : state) benchmark::DoNotOptimize(cmn::batch_gradients(model, triplets, 0.1).mean_loss);
}
BENCHMARK(BM_BatchGradients);

void BM_Evaluate(benchmark::State& state) {
    auto model = make_model(2);
    for (auto _ : state) benchmark::DoNotOptimize(cmn::evaluate(model.scorer(), fixture().split).hr10);
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
