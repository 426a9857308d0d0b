#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmn/checkpoint.hpp"
#include "cmn/data.hpp"
#include "cmn/evaluation.hpp"
#include "cmn/model.hpp"
#include "cmn/numerics.hpp"

namespace cmn {

struct TrainConfig {
    ModelConfig model;
    int neg_ratio = 4;
    std::size_t batch_size = 128;
    RmsPropSettings optimizer;
    double clip_norm = 5.0;
    double weight_decay = 0.1;
    int max_epochs = 30;
    int patience = 5;
    std::uint64_t seed = 1;
    bool pretrain = true;
    int pretrain_epochs = 15;
    int threads = 1;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// -log sigmoid(pos - neg), evaluated as softplus(neg - pos).
double bpr_loss(double positive_score, double negative_score) noexcept;

/// One gradient buffer per parameter tensor. Embedding tables (row_sparse)
/// keep only the rows touched by the batch; everything else is dense.
class GradientSet {
public:
    GradientSet() = default;
    explicit GradientSet(std::span<const ParameterRef> params);

    std::size_t slot_count() const noexcept { return slots_.size(); }
    bool is_sparse(std::size_t slot) const { return slots_[slot].sparse; }

    Matrix& dense(std::size_t slot) { return slots_[slot].dense; }
    const Matrix& dense(std::size_t slot) const { return slots_[slot].dense; }

    /// Gradient row r of a slot; a sparse row is zero-initialised on first touch.
    /// The span is invalidated by the next first-touch of the same slot.
    std::span<double> row(std::size_t slot, std::size_t r);

    std::span<const std::size_t> touched_rows(std::size_t slot) const { return slots_[slot].touched; }
    std::span<const double> touched_row(std::size_t slot, std::size_t k) const;
    std::span<double> touched_row(std::size_t slot, std::size_t k);

    void clear();
    void add(const GradientSet& other);

    /// Flat views over every stored gradient value (for norm clipping).
    std::vector<std::span<double>> views();
    double squared_norm() const;

    /// Materialises a slot as a full rows x cols matrix.
    Matrix to_dense(std::size_t slot) const;

private:
    struct Slot {
        bool sparse = false;
        std::size_t rows = 0;
        std::size_t cols = 0;
        Matrix dense;
        std::vector<std::int64_t> slot_of_row;
        std::vector<std::size_t> touched;
        std::vector<double> values;
    };
    std::vector<Slot> slots_;
};

/// A model trainable under the shared pairwise (BPR) loop.
class RankingModel {
public:
    virtual ~RankingModel() = default;

    virtual std::string kind() const = 0;
    virtual double score(UserIndex u, ItemIndex i) const = 0;
    /// Trainable tensors; gradient slot k corresponds to entry k.
    virtual std::vector<ParameterRef> parameters() = 0;
    /// Adds scale * d bpr_loss / d theta for one triplet; returns its BPR loss.
    virtual double accumulate_triplet(const Triplet& t, double scale, GradientSet& grads) const = 0;
    virtual Checkpoint to_checkpoint() const = 0;

    Scorer scorer() const {
        return [this](UserIndex u, ItemIndex i) { return score(u, i); };
    }
};

/// Collaborative memory network under the BPR objective.
class CmnModel final : public RankingModel {
public:
    CmnModel(CmnParameters params, ModelConfig config, std::shared_ptr<const NeighborIndex> index);

    std::string kind() const override { return "cmn"; }
    double score(UserIndex u, ItemIndex i) const override;
    std::vector<ParameterRef> parameters() override { return parameter_refs(params_); }
    double accumulate_triplet(const Triplet& t, double scale, GradientSet& grads) const override;
    Checkpoint to_checkpoint() const override;

    ForwardResult forward(UserIndex u, ItemIndex i) const;

    const CmnParameters& params() const noexcept { return params_; }
    CmnParameters& params() noexcept { return params_; }
    const ModelConfig& config() const noexcept { return config_; }
    const NeighborIndex& index() const noexcept { return *index_; }

private:
    CmnParameters params_;
    ModelConfig config_;
    std::shared_ptr<const NeighborIndex> index_;
};

/// Reverse-mode pass through one forward evaluation: adds upstream * d score / d theta
/// into grads, whose slots follow parameter_refs() order.
void backpropagate(const ForwardState& state, UserIndex u, ItemIndex i, double upstream, const CmnParameters& params,
                   Variant variant, GradientSet& grads);

struct BatchGradients {
    double mean_loss = 0.0;  // mean BPR loss, without the decay term
    GradientSet grads;
};

/// Exact gradient of mean_t bpr(t) + weight_decay/2 * sum ||theta||^2 over
/// the decayed tensors. Threads split the batch into contiguous chunks whose
/// partial gradients are summed in chunk order.
BatchGradients batch_gradients(RankingModel& model, std::span<const Triplet> batch, double weight_decay,
                               int threads = 1);

/// Per-tensor RMSProp state. Row-sparse tensors are updated only on touched rows.
class RmsPropOptimizer {
public:
    RmsPropOptimizer(std::span<const ParameterRef> params, RmsPropSettings settings);

    void apply(std::span<const ParameterRef> params, GradientSet& grads);
    const RmsPropSettings& settings() const noexcept { return settings_; }

private:
    RmsPropSettings settings_;
    std::vector<Matrix> accumulators_;
    std::vector<Matrix> momenta_;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_hr10 = 0.0;
    double val_ndcg10 = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_hr10 = 0.0;
};

/// Epoch loop: resample triplets, shuffle into batches, compute gradients,
/// clip to the global norm, RMSProp step. After each epoch the validation
/// HR@10 is measured; parameters of the best epoch are restored on return.
/// Stops at max_epochs or after `patience` epochs without improvement.
/// Throws DivergenceError on a non-finite batch loss.
TrainResult train(RankingModel& model, const SplitDataset& split, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Trains a ReLU GMF model under the same loop for config.pretrain_epochs
/// epochs and returns its (user, item) embeddings.
std::pair<Matrix, Matrix> pretrain_gmf(const SplitDataset& split, const TrainConfig& config);

/// He-initialised CMN; M and E come from GMF pretraining when config.pretrain is set.
CmnModel make_cmn_model(const SplitDataset& split, std::shared_ptr<const NeighborIndex> index,
                        const TrainConfig& config);

}  // namespace cmn
