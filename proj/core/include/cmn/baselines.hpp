#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/training.hpp"

namespace cmn {

/// r = v . phi(m_u * e_i). With phi = identity and v frozen to ones this is
/// plain matrix factorisation, i.e. BPR-MF under the pairwise loss.
class GmfModel final : public RankingModel {
public:
    GmfModel(Matrix users, Matrix items, Matrix output_weight, bool relu, bool train_output_weight);

    /// He-initialised embeddings; v is He-initialised when trainable, all ones otherwise.
    static GmfModel initialized(std::size_t users, std::size_t items, std::size_t dim, std::uint64_t seed, bool relu,
                                bool train_output_weight);

    std::string kind() const override { return relu_ || train_output_ ? "gmf" : "bpr"; }
    double score(UserIndex u, ItemIndex i) const override;
    std::vector<ParameterRef> parameters() override;
    double accumulate_triplet(const Triplet& t, double scale, GradientSet& grads) const override;
    Checkpoint to_checkpoint() const override;

    const Matrix& users() const noexcept { return users_; }
    const Matrix& items() const noexcept { return items_; }
    const Matrix& output_weight() const noexcept { return output_weight_; }
    bool relu() const noexcept { return relu_; }

private:
    void accumulate_score(UserIndex u, ItemIndex i, double upstream, GradientSet& grads) const;

    Matrix users_;
    Matrix items_;
    Matrix output_weight_;
    bool relu_;
    bool train_output_;
};

/// User-based FISM: r = |N'(i)|^-rho sum_{v in N'(i)} c_u . c_v, N'(i) = N(i) \ {u}.
class FismUserModel final : public RankingModel {
public:
    FismUserModel(Matrix neighbor_memory, double rho, std::shared_ptr<const NeighborIndex> index);

    static FismUserModel initialized(std::size_t users, std::size_t dim, double rho, std::uint64_t seed,
                                     std::shared_ptr<const NeighborIndex> index);

    std::string kind() const override { return "fism"; }
    double score(UserIndex u, ItemIndex i) const override;
    std::vector<ParameterRef> parameters() override;
    double accumulate_triplet(const Triplet& t, double scale, GradientSet& grads) const override;
    Checkpoint to_checkpoint() const override;

    const Matrix& neighbor_memory() const noexcept { return memory_; }
    double rho() const noexcept { return rho_; }

private:
    void accumulate_score(UserIndex u, ItemIndex i, double upstream, GradientSet& grads) const;

    Matrix memory_;
    double rho_;
    std::shared_ptr<const NeighborIndex> index_;
};

/// Top-K cosine neighbours per item over the binary train matrix.
class ItemSimilarityIndex {
public:
    struct Entry {
        ItemIndex item;
        double similarity;
    };

    explicit ItemSimilarityIndex(std::vector<std::vector<Entry>> lists, std::size_t k)
        : lists_(std::move(lists)), k_(k) {}

    std::span<const Entry> neighbors(ItemIndex i) const { return lists_.at(i); }
    std::size_t item_count() const noexcept { return lists_.size(); }
    std::size_t k() const noexcept { return k_; }

private:
    std::vector<std::vector<Entry>> lists_;
    std::size_t k_;
};

/// cos(i, j) = |U_i & U_j| / sqrt(|U_i| |U_j|); lists sorted by descending
/// similarity (ascending item on ties), zero similarities and self omitted.
ItemSimilarityIndex build_item_knn(const SplitDataset& split, std::size_t k, int threads = 1);

/// Sum of sim(i, j) over the items j in i's top-K list that u rated in train.
double knn_score(UserIndex u, ItemIndex i, const ItemSimilarityIndex& index, const SplitDataset& split);

GmfModel train_bpr_mf(const SplitDataset& split, const TrainConfig& config, TrainResult* result = nullptr);
GmfModel train_gmf(const SplitDataset& split, const TrainConfig& config, TrainResult* result = nullptr);
FismUserModel train_fism_user(const SplitDataset& split, std::shared_ptr<const NeighborIndex> index, double rho,
                              const TrainConfig& config, TrainResult* result = nullptr);

}  // namespace cmn
