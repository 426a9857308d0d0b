#include "cmn/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "cmn/errors.hpp"

namespace cmn {

// ---------------------------------------------------------------- GMF / BPR-MF

GmfModel::GmfModel(Matrix users, Matrix items, Matrix output_weight, bool relu, bool train_output_weight)
    : users_(std::move(users)),
      items_(std::move(items)),
      output_weight_(std::move(output_weight)),
      relu_(relu),
      train_output_(train_output_weight) {
    const std::size_t d = users_.cols();
    if (items_.cols() != d || output_weight_.rows() != 1 || output_weight_.cols() != d) {
        throw ShapeError("GMF tensors disagree on the embedding size");
    }
}

GmfModel GmfModel::initialized(std::size_t users, std::size_t items, std::size_t dim, std::uint64_t seed, bool relu,
                               bool train_output_weight) {
    Matrix v = train_output_weight ? he_init(1, dim, dim, seed + 3) : Matrix(1, dim, 1.0);
    return GmfModel(he_init(users, dim, dim, seed + 1), he_init(items, dim, dim, seed + 2), std::move(v), relu,
                    train_output_weight);
}

double GmfModel::score(UserIndex u, ItemIndex i) const {
    return score_gmf(users_.row(u), items_.row(i), output_weight_.row(0), relu_);
}

std::vector<ParameterRef> GmfModel::parameters() {
    std::vector<ParameterRef> refs{{"M", &users_, true, false}, {"E", &items_, true, false}};
    if (train_output_) refs.push_back({"v", &output_weight_, false, true});
    return refs;
}

void GmfModel::accumulate_score(UserIndex u, ItemIndex i, double upstream, GradientSet& grads) const {
    const auto mu = users_.row(u);
    const auto ei = items_.row(i);
    const auto v = output_weight_.row(0);
    const std::size_t d = mu.size();
    if (train_output_) {
        auto gv = grads.row(2, 0);
        for (std::size_t k = 0; k < d; ++k) {
            const double x = mu[k] * ei[k];
            gv[k] += upstream * (relu_ && x < 0.0 ? 0.0 : x);
        }
    }
    {
        auto gm = grads.row(0, u);
        for (std::size_t k = 0; k < d; ++k) {
            const double gate = relu_ ? relu_derivative(mu[k] * ei[k]) : 1.0;
            gm[k] += upstream * v[k] * gate * ei[k];
        }
    }
    auto ge = grads.row(1, i);
    for (std::size_t k = 0; k < d; ++k) {
        const double gate = relu_ ? relu_derivative(mu[k] * ei[k]) : 1.0;
        ge[k] += upstream * v[k] * gate * mu[k];
    }
}

double GmfModel::accumulate_triplet(const Triplet& t, double scale, GradientSet& grads) const {
    const double margin = score(t.user, t.positive) - score(t.user, t.negative);
    const double pull = sigmoid(-margin);
    accumulate_score(t.user, t.positive, -scale * pull, grads);
    accumulate_score(t.user, t.negative, scale * pull, grads);
    return softplus(-margin);
}

Checkpoint GmfModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.model = kind();
    ckpt.set("users", std::to_string(users_.rows()));
    ckpt.set("items", std::to_string(items_.rows()));
    ckpt.set("dim", std::to_string(users_.cols()));
    ckpt.set("relu", relu_ ? "1" : "0");
    ckpt.set("train_output", train_output_ ? "1" : "0");
    ckpt.tensors.emplace_back("M", users_);
    ckpt.tensors.emplace_back("E", items_);
    ckpt.tensors.emplace_back("v", output_weight_);
    return ckpt;
}

// ---------------------------------------------------------------- FISM (user-based)

FismUserModel::FismUserModel(Matrix neighbor_memory, double rho, std::shared_ptr<const NeighborIndex> index)
    : memory_(std::move(neighbor_memory)), rho_(rho), index_(std::move(index)) {
    if (!(rho_ >= 0.0 && rho_ <= 1.0)) throw ConfigError("FISM rho must lie in [0, 1]");
    if (!index_) throw ShapeError("FISM needs a neighbor index");
}

FismUserModel FismUserModel::initialized(std::size_t users, std::size_t dim, double rho, std::uint64_t seed,
                                         std::shared_ptr<const NeighborIndex> index) {
    return FismUserModel(he_init(users, dim, dim, seed + 5), rho, std::move(index));
}

double FismUserModel::score(UserIndex u, ItemIndex i) const { return score_fism_user(u, i, memory_, *index_, rho_); }

std::vector<ParameterRef> FismUserModel::parameters() { return {{"C", &memory_, true, false}}; }

void FismUserModel::accumulate_score(UserIndex u, ItemIndex i, double upstream, GradientSet& grads) const {
    const auto users = index_->neighbors(i);
    const std::size_t count = static_cast<std::size_t>(
        std::count_if(users.begin(), users.end(), [u](UserIndex v) { return v != u; }));
    if (count == 0) return;
    const double alpha = upstream * std::pow(static_cast<double>(count), -rho_);
    const std::size_t d = memory_.cols();
    Vector neighbor_sum(d, 0.0);
    for (UserIndex v : users) {
        if (v == u) continue;
        axpy(1.0, memory_.row(v), neighbor_sum);
        axpy(alpha, memory_.row(u), grads.row(0, v));
    }
    axpy(alpha, neighbor_sum, grads.row(0, u));
}

double FismUserModel::accumulate_triplet(const Triplet& t, double scale, GradientSet& grads) const {
    const double margin = score(t.user, t.positive) - score(t.user, t.negative);
    const double pull = sigmoid(-margin);
    accumulate_score(t.user, t.positive, -scale * pull, grads);
    accumulate_score(t.user, t.negative, scale * pull, grads);
    return softplus(-margin);
}

Checkpoint FismUserModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.model = kind();
    ckpt.set("users", std::to_string(memory_.rows()));
    ckpt.set("items", std::to_string(index_->item_count()));
    ckpt.set("dim", std::to_string(memory_.cols()));
    ckpt.set("rho", format_double(rho_));
    ckpt.tensors.emplace_back("C", memory_);
    return ckpt;
}

// ---------------------------------------------------------------- item KNN

ItemSimilarityIndex build_item_knn(const SplitDataset& split, std::size_t k, int threads) {
    if (k == 0) throw ConfigError("KNN K must be >= 1");
    const std::size_t q = split.item_count();
    const NeighborIndex raters = build_neighborhoods(split);
    std::vector<std::vector<ItemSimilarityIndex::Entry>> lists(q);
    parallel_chunks(q, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> overlap(q, 0);
        std::vector<ItemIndex> seen;
        for (std::size_t i = begin; i < end; ++i) {
            const auto users_i = raters.neighbors(static_cast<ItemIndex>(i));
            if (users_i.empty()) continue;
            seen.clear();
            for (UserIndex u : users_i) {
                for (ItemIndex j : split.train_items(u)) {
                    if (j == i) continue;
                    if (overlap[j]++ == 0) seen.push_back(j);
                }
            }
            auto& list = lists[i];
            list.reserve(seen.size());
            for (ItemIndex j : seen) {
                const double denom = std::sqrt(static_cast<double>(users_i.size()) *
                                               static_cast<double>(raters.neighbors(j).size()));
                list.push_back({j, static_cast<double>(overlap[j]) / denom});
                overlap[j] = 0;
            }
            const auto better = [](const ItemSimilarityIndex::Entry& a, const ItemSimilarityIndex::Entry& b) {
                if (a.similarity != b.similarity) return a.similarity > b.similarity;
                return a.item < b.item;
            };
            if (list.size() > k) {
                std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(k), list.end(), better);
                list.resize(k);
            } else {
                std::sort(list.begin(), list.end(), better);
            }
        }
    });
    return ItemSimilarityIndex(std::move(lists), k);
}

double knn_score(UserIndex u, ItemIndex i, const ItemSimilarityIndex& index, const SplitDataset& split) {
    double total = 0.0;
    for (const auto& entry : index.neighbors(i))
        if (split.in_train(u, entry.item)) total += entry.similarity;
    return total;
}

// ---------------------------------------------------------------- trainers

namespace {

TrainConfig baseline_config(const TrainConfig& config) {
    TrainConfig c = config;
    c.pretrain = false;
    return c;
}

}  // namespace

GmfModel train_bpr_mf(const SplitDataset& split, const TrainConfig& config, TrainResult* result) {
    GmfModel model =
        GmfModel::initialized(split.user_count(), split.item_count(), config.model.dim, config.seed, false, false);
    TrainResult r = train(model, split, baseline_config(config));
    if (result) *result = std::move(r);
    return model;
}

GmfModel train_gmf(const SplitDataset& split, const TrainConfig& config, TrainResult* result) {
    GmfModel model =
        GmfModel::initialized(split.user_count(), split.item_count(), config.model.dim, config.seed, true, true);
    TrainResult r = train(model, split, baseline_config(config));
    if (result) *result = std::move(r);
    return model;
}

FismUserModel train_fism_user(const SplitDataset& split, std::shared_ptr<const NeighborIndex> index, double rho,
                              const TrainConfig& config, TrainResult* result) {
    FismUserModel model = FismUserModel::initialized(split.user_count(), config.model.dim, rho, config.seed, std::move(index));
    TrainResult r = train(model, split, baseline_config(config));
    if (result) *result = std::move(r);
    return model;
}

}  // namespace cmn
