#include "cmn/baselines.hpp"
#include "cmn/training.hpp"

namespace cmn {

std::pair<Matrix, Matrix> pretrain_gmf(const SplitDataset& split, const TrainConfig& config) {
    TrainConfig gmf_config = config;
    gmf_config.pretrain = false;
    gmf_config.max_epochs = config.pretrain_epochs;
    GmfModel gmf = train_gmf(split, gmf_config);
    return {gmf.users(), gmf.items()};
}

CmnModel make_cmn_model(const SplitDataset& split, std::shared_ptr<const NeighborIndex> index,
                        const TrainConfig& config) {
    CmnParameters params = CmnParameters::initialized(split.user_count(), split.item_count(), config.model.dim,
                                                      config.model.hops, config.seed);
    if (config.pretrain && config.pretrain_epochs > 0) {
        auto [users, items] = pretrain_gmf(split, config);
        params.user_memory = std::move(users);
        params.item_memory = std::move(items);
    }
    return CmnModel(std::move(params), config.model, std::move(index));
}

}  // namespace cmn
