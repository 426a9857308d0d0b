#include "cmn/model_io.hpp"

#include "cmn/errors.hpp"

namespace cmn {
namespace {

std::size_t meta_size(const Checkpoint& ckpt, const std::string& key) {
    try {
        return static_cast<std::size_t>(std::stoull(ckpt.get(key)));
    } catch (const std::logic_error&) {
        throw DataError("checkpoint metadata '" + key + "' is not a number");
    }
}

void check_dimension(const Checkpoint& ckpt, const std::string& key, std::size_t expected) {
    const std::size_t found = meta_size(ckpt, key);
    if (found != expected) {
        throw ShapeError("dimension '" + key + "' mismatch: checkpoint has " + std::to_string(found) +
                         ", split has " + std::to_string(expected));
    }
}

}  // namespace

Scorer LoadedModel::scorer() const {
    if (knn) {
        const ItemSimilarityIndex* sim = knn.get();
        const SplitDataset* data = split;
        return [sim, data](UserIndex u, ItemIndex i) { return knn_score(u, i, *sim, *data); };
    }
    return model->scorer();
}

Checkpoint knn_checkpoint(std::size_t users, std::size_t items, std::size_t k) {
    Checkpoint ckpt;
    ckpt.model = "knn";
    ckpt.set("users", std::to_string(users));
    ckpt.set("items", std::to_string(items));
    ckpt.set("k", std::to_string(k));
    return ckpt;
}

LoadedModel load_model(const Checkpoint& ckpt, const SplitDataset& split) {
    check_dimension(ckpt, "users", split.user_count());
    check_dimension(ckpt, "items", split.item_count());
    LoadedModel loaded;
    loaded.kind = ckpt.model;
    loaded.split = &split;
    loaded.index = std::make_shared<const NeighborIndex>(build_neighborhoods(split));

    if (ckpt.model == "cmn") {
        ModelConfig config;
        config.dim = meta_size(ckpt, "dim");
        config.hops = meta_size(ckpt, "hops");
        config.variant = parse_variant(ckpt.get("variant"));
        config.exclude_self = ckpt.get("exclude_self") == "1";
        CmnParameters params = CmnParameters::zeros(split.user_count(), split.item_count(), config.dim, config.hops);
        for (auto& ref : parameter_refs(params)) {
            const Matrix& stored = ckpt.tensor(ref.name);
            if (stored.rows() != ref.tensor->rows() || stored.cols() != ref.tensor->cols()) {
                throw ShapeError("tensor " + ref.name + " has shape " + std::to_string(stored.rows()) + "x" +
                                 std::to_string(stored.cols()) + ", expected " + std::to_string(ref.tensor->rows()) +
                                 "x" + std::to_string(ref.tensor->cols()));
            }
            *ref.tensor = stored;
        }
        loaded.model = std::make_unique<CmnModel>(std::move(params), config, loaded.index);
    } else if (ckpt.model == "gmf" || ckpt.model == "bpr") {
        loaded.model = std::make_unique<GmfModel>(ckpt.tensor("M"), ckpt.tensor("E"), ckpt.tensor("v"),
                                                  ckpt.get("relu") == "1", ckpt.get("train_output") == "1");
    } else if (ckpt.model == "fism") {
        loaded.model = std::make_unique<FismUserModel>(ckpt.tensor("C"), std::stod(ckpt.get("rho")), loaded.index);
    } else if (ckpt.model == "knn") {
        loaded.knn = std::make_unique<ItemSimilarityIndex>(build_item_knn(split, meta_size(ckpt, "k")));
    } else {
        throw DataError("unknown model kind '" + ckpt.model + "' in checkpoint");
    }
    return loaded;
}

}  // namespace cmn
