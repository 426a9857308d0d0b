#pragma once

#include <memory>
#include <string>

#include "cmn/baselines.hpp"
#include "cmn/checkpoint.hpp"
#include "cmn/data.hpp"
#include "cmn/evaluation.hpp"
#include "cmn/training.hpp"

namespace cmn {

/// A checkpoint brought back to life against a split.
struct LoadedModel {
    std::string kind;
    std::shared_ptr<const NeighborIndex> index;
    std::unique_ptr<RankingModel> model;          // cmn, gmf, bpr, fism
    std::unique_ptr<ItemSimilarityIndex> knn;     // knn only
    const SplitDataset* split = nullptr;

    Scorer scorer() const;
    /// Non-null only for CMN checkpoints.
    const CmnModel* cmn() const { return dynamic_cast<const CmnModel*>(model.get()); }
};

/// Rebuilds the model described by `checkpoint`. Throws ShapeError naming the
/// offending dimension when the checkpoint's users/items disagree with the
/// split, and DataError on unknown model kinds or missing tensors.
LoadedModel load_model(const Checkpoint& checkpoint, const SplitDataset& split);

/// KNN has no learned tensors; its checkpoint records K and the shape only.
Checkpoint knn_checkpoint(std::size_t users, std::size_t items, std::size_t k);

}  // namespace cmn
