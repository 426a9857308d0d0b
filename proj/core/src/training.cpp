#include "cmn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "cmn/errors.hpp"

namespace cmn {

double bpr_loss(double positive_score, double negative_score) noexcept {
    return softplus(negative_score - positive_score);
}

// ---------------------------------------------------------------- GradientSet

GradientSet::GradientSet(std::span<const ParameterRef> params) {
    slots_.reserve(params.size());
    for (const auto& p : params) {
        Slot s;
        s.sparse = p.row_sparse;
        s.rows = p.tensor->rows();
        s.cols = p.tensor->cols();
        if (s.sparse) {
            s.slot_of_row.assign(s.rows, -1);
        } else {
            s.dense = Matrix(s.rows, s.cols);
        }
        slots_.push_back(std::move(s));
    }
}

std::span<double> GradientSet::row(std::size_t slot, std::size_t r) {
    Slot& s = slots_[slot];
    if (!s.sparse) return s.dense.row(r);
    std::int64_t k = s.slot_of_row[r];
    if (k < 0) {
        k = static_cast<std::int64_t>(s.touched.size());
        s.slot_of_row[r] = k;
        s.touched.push_back(r);
        s.values.resize(s.values.size() + s.cols, 0.0);
    }
    return {s.values.data() + static_cast<std::size_t>(k) * s.cols, s.cols};
}

std::span<const double> GradientSet::touched_row(std::size_t slot, std::size_t k) const {
    const Slot& s = slots_[slot];
    return {s.values.data() + k * s.cols, s.cols};
}

std::span<double> GradientSet::touched_row(std::size_t slot, std::size_t k) {
    Slot& s = slots_[slot];
    return {s.values.data() + k * s.cols, s.cols};
}

void GradientSet::clear() {
    for (Slot& s : slots_) {
        if (s.sparse) {
            for (std::size_t r : s.touched) s.slot_of_row[r] = -1;
            s.touched.clear();
            s.values.clear();
        } else {
            s.dense.fill(0.0);
        }
    }
}

void GradientSet::add(const GradientSet& other) {
    for (std::size_t slot = 0; slot < slots_.size(); ++slot) {
        const Slot& o = other.slots_[slot];
        if (o.sparse) {
            for (std::size_t k = 0; k < o.touched.size(); ++k) axpy(1.0, other.touched_row(slot, k), row(slot, o.touched[k]));
        } else {
            axpy(1.0, o.dense.values(), slots_[slot].dense.values());
        }
    }
}

std::vector<std::span<double>> GradientSet::views() {
    std::vector<std::span<double>> out;
    out.reserve(slots_.size());
    for (Slot& s : slots_) out.push_back(s.sparse ? std::span<double>(s.values) : s.dense.values());
    return out;
}

double GradientSet::squared_norm() const {
    double total = 0.0;
    for (const Slot& s : slots_)
        total += s.sparse ? cmn::squared_norm(s.values) : cmn::squared_norm(s.dense.values());
    return total;
}

Matrix GradientSet::to_dense(std::size_t slot) const {
    const Slot& s = slots_[slot];
    if (!s.sparse) return s.dense;
    Matrix m(s.rows, s.cols);
    for (std::size_t k = 0; k < s.touched.size(); ++k) {
        const auto src = touched_row(slot, k);
        std::copy(src.begin(), src.end(), m.row(s.touched[k]).begin());
    }
    return m;
}

// ---------------------------------------------------------------- CMN backprop

namespace {

constexpr std::size_t kSlotM = 0;
constexpr std::size_t kSlotE = 1;
constexpr std::size_t kSlotC = 2;
constexpr std::size_t kSlotU = 3;
constexpr std::size_t kSlotW = 4;
constexpr std::size_t kSlotV = 5;
constexpr std::size_t kSlotB = 6;
constexpr std::size_t hop_projection_slot(std::size_t h) { return 7 + 2 * (h - 1); }
constexpr std::size_t hop_bias_slot(std::size_t h) { return 8 + 2 * (h - 1); }

}  // namespace

void backpropagate(const ForwardState& s, UserIndex u, ItemIndex i, double upstream, const CmnParameters& p,
                   Variant variant, GradientSet& g) {
    const std::size_t d = p.dim();
    const std::size_t hops = p.hops();
    const bool relu = uses_relu(variant);
    const auto v = p.output_weight.row(0);

    // Output layer: r = v . phi(a).
    Vector da(d);
    {
        auto gv = g.row(kSlotV, 0);
        for (std::size_t k = 0; k < d; ++k) {
            const double a = s.output_activation[k];
            const double phi = relu ? (a > 0.0 ? a : 0.0) : a;
            gv[k] += upstream * phi;
            da[k] = upstream * v[k] * (relu ? relu_derivative(a) : 1.0);
        }
    }
    add_outer(1.0, da, s.latent, g.dense(kSlotU));
    add_outer(1.0, da, s.summaries.back(), g.dense(kSlotW));
    axpy(1.0, da, g.row(kSlotB, 0));

    Vector d_latent(d);
    matvec_transposed(p.latent_projection, da, d_latent);
    Vector d_summary(d);
    matvec_transposed(p.summary_projection, da, d_summary);

    // Gradients w.r.t. the queries z^0 .. z^{H-1}.
    std::vector<Vector> d_query(hops, Vector(d, 0.0));
    const std::size_t n = s.neighbors.size();
    Vector dp(n);
    Vector dq(n);
    for (std::size_t h = hops; h >= 1; --h) {
        const Vector& weights = s.weights[h - 1];
        const Vector& query = s.queries[h - 1];
        if (n > 0) {
            double mean_dp = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const UserIndex nb = s.neighbors[k];
                dp[k] = dot(p.neighbor_memory.row(nb), d_summary);
                axpy(weights[k], d_summary, g.row(kSlotC, nb));
                mean_dp += weights[k] * dp[k];
            }
            if (uses_attention(variant)) {
                for (std::size_t k = 0; k < n; ++k) {
                    dq[k] = weights[k] * (dp[k] - mean_dp);
                    const UserIndex nb = s.neighbors[k];
                    axpy(dq[k], query, g.row(kSlotM, nb));
                    axpy(dq[k], p.user_memory.row(nb), d_query[h - 1]);
                }
            }
        }
        if (h >= 2) {
            // z^{h-1} = phi(W^{h-1} z^{h-2} + o^{h-1} + b^{h-1})
            const Vector& pre = s.hop_activations[h - 2];
            Vector ds(d);
            for (std::size_t k = 0; k < d; ++k) ds[k] = d_query[h - 1][k] * (relu ? relu_derivative(pre[k]) : 1.0);
            add_outer(1.0, ds, s.queries[h - 2], g.dense(hop_projection_slot(h - 1)));
            axpy(1.0, ds, g.row(hop_bias_slot(h - 1), 0));
            matvec_transposed(p.hop_projection[h - 2], ds, d_query[h - 2], true);
            d_summary = std::move(ds);
        }
    }

    // z^0 = m_u + e_i and latent = m_u * e_i.
    const auto mu = p.user_memory.row(u);
    const auto ei = p.item_memory.row(i);
    {
        auto gm = g.row(kSlotM, u);
        for (std::size_t k = 0; k < d; ++k) gm[k] += d_query[0][k] + d_latent[k] * ei[k];
    }
    {
        auto ge = g.row(kSlotE, i);
        for (std::size_t k = 0; k < d; ++k) ge[k] += d_query[0][k] + d_latent[k] * mu[k];
    }
}

// ---------------------------------------------------------------- CmnModel

CmnModel::CmnModel(CmnParameters params, ModelConfig config, std::shared_ptr<const NeighborIndex> index)
    : params_(std::move(params)), config_(config), index_(std::move(index)) {
    params_.validate();
    if (params_.dim() != config_.dim || params_.hops() != config_.hops) {
        throw ShapeError("parameters (d=" + std::to_string(params_.dim()) + ", H=" + std::to_string(params_.hops()) +
                         ") do not match the model config (d=" + std::to_string(config_.dim) +
                         ", H=" + std::to_string(config_.hops) + ")");
    }
    if (!index_ || index_->item_count() != params_.item_count()) {
        throw ShapeError("neighbor index does not cover the item memory");
    }
}

double CmnModel::score(UserIndex u, ItemIndex i) const {
    return forward_state(u, i, params_, config_, *index_).score;
}

ForwardResult CmnModel::forward(UserIndex u, ItemIndex i) const {
    return cmn::forward(u, i, params_, config_, *index_);
}

double CmnModel::accumulate_triplet(const Triplet& t, double scale, GradientSet& grads) const {
    const ForwardState pos = forward_state(t.user, t.positive, params_, config_, *index_);
    const ForwardState neg = forward_state(t.user, t.negative, params_, config_, *index_);
    const double margin = pos.score - neg.score;
    const double pull = sigmoid(-margin);  // -d loss / d margin
    backpropagate(pos, t.user, t.positive, -scale * pull, params_, config_.variant, grads);
    backpropagate(neg, t.user, t.negative, scale * pull, params_, config_.variant, grads);
    return softplus(-margin);
}

Checkpoint CmnModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.model = kind();
    ckpt.set("users", std::to_string(params_.user_count()));
    ckpt.set("items", std::to_string(params_.item_count()));
    ckpt.set("dim", std::to_string(config_.dim));
    ckpt.set("hops", std::to_string(config_.hops));
    ckpt.set("variant", std::string(to_string(config_.variant)));
    ckpt.set("exclude_self", config_.exclude_self ? "1" : "0");
    for (const auto& ref : parameter_refs(const_cast<CmnParameters&>(params_)))
        ckpt.tensors.emplace_back(ref.name, *ref.tensor);
    return ckpt;
}

// ---------------------------------------------------------------- batch gradients

BatchGradients batch_gradients(RankingModel& model, std::span<const Triplet> batch, double weight_decay,
                               int threads) {
    const auto params = model.parameters();
    BatchGradients out{0.0, GradientSet(params)};
    if (batch.empty()) return out;
    const double scale = 1.0 / static_cast<double>(batch.size());
    const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1,
                                                        batch.size());
    double loss_sum = 0.0;
    if (workers == 1) {
        for (const Triplet& t : batch) loss_sum += model.accumulate_triplet(t, scale, out.grads);
    } else {
        std::vector<GradientSet> partial(workers, GradientSet(params));
        std::vector<double> partial_loss(workers, 0.0);
        const std::size_t chunk = (batch.size() + workers - 1) / workers;
        parallel_chunks(workers, static_cast<int>(workers), [&](std::size_t begin, std::size_t end) {
            for (std::size_t w = begin; w < end; ++w) {
                const std::size_t lo = std::min(batch.size(), w * chunk);
                const std::size_t hi = std::min(batch.size(), lo + chunk);
                for (std::size_t k = lo; k < hi; ++k)
                    partial_loss[w] += model.accumulate_triplet(batch[k], scale, partial[w]);
            }
        });
        for (std::size_t w = 0; w < workers; ++w) {
            out.grads.add(partial[w]);
            loss_sum += partial_loss[w];
        }
    }
    if (weight_decay != 0.0) {
        for (std::size_t slot = 0; slot < params.size(); ++slot)
            if (params[slot].decayed) axpy(weight_decay, params[slot].tensor->values(), out.grads.dense(slot).values());
    }
    out.mean_loss = loss_sum * scale;
    return out;
}

// ---------------------------------------------------------------- optimizer

RmsPropOptimizer::RmsPropOptimizer(std::span<const ParameterRef> params, RmsPropSettings settings)
    : settings_(settings) {
    for (const auto& p : params) {
        accumulators_.emplace_back(p.tensor->rows(), p.tensor->cols());
        momenta_.emplace_back(p.tensor->rows(), p.tensor->cols());
    }
}

void RmsPropOptimizer::apply(std::span<const ParameterRef> params, GradientSet& grads) {
    if (params.size() != accumulators_.size()) throw ShapeError("optimizer state does not match the parameter list");
    for (std::size_t slot = 0; slot < params.size(); ++slot) {
        Matrix& value = *params[slot].tensor;
        if (grads.is_sparse(slot)) {
            const auto rows = grads.touched_rows(slot);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const std::size_t r = rows[k];
                rmsprop_step(value.row(r), grads.touched_row(slot, k), accumulators_[slot].row(r), momenta_[slot].row(r),
                             settings_);
            }
        } else {
            rmsprop_step(value.values(), grads.dense(slot).values(), accumulators_[slot].values(),
                         momenta_[slot].values(), settings_);
        }
    }
}

// ---------------------------------------------------------------- epoch loop

TrainResult train(RankingModel& model, const SplitDataset& split, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    if (config.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (config.max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    const auto params = model.parameters();
    RmsPropOptimizer optimizer(params, config.optimizer);
    Rng rng(config.seed);

    bool has_validation = false;
    for (UserIndex u = 0; u < split.user_count() && !has_validation; ++u)
        has_validation = split.validation_item(u).has_value();

    TrainResult result;
    std::vector<Matrix> best;
    int stale = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<Triplet> triplets = sample_epoch_triplets(split, config.neg_ratio, rng);
        const auto batches = make_batches(triplets, config.batch_size, rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            BatchGradients bg = batch_gradients(model, batches[b], config.weight_decay, config.threads);
            if (!std::isfinite(bg.mean_loss) || !std::isfinite(bg.grads.squared_norm())) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch " << b << " of " << batches.size()
                    << " (first triplet user " << batches[b].front().user << ")";
                throw DivergenceError(msg.str());
            }
            loss_sum += bg.mean_loss * static_cast<double>(batches[b].size());
            if (config.clip_norm > 0.0) {
                const auto views = bg.grads.views();
                clip_global_norm(views, config.clip_norm);
            }
            optimizer.apply(params, bg.grads);
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = triplets.empty() ? 0.0 : loss_sum / static_cast<double>(triplets.size());
        if (has_validation) {
            const EvalReport val = evaluate(model.scorer(), split, HoldOut::validation, config.threads);
            record.val_hr10 = val.hr10;
            record.val_ndcg10 = val.ndcg10;
        }
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.push_back(record);
        if (on_epoch) on_epoch(record);

        if (result.best_epoch == 0 || record.val_hr10 > result.best_val_hr10 || !has_validation) {
            result.best_epoch = epoch;
            result.best_val_hr10 = record.val_hr10;
            best.clear();
            for (const auto& p : params) best.push_back(*p.tensor);
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    if (!best.empty())
        for (std::size_t k = 0; k < params.size(); ++k) *params[k].tensor = std::move(best[k]);
    return result;
}

}  // namespace cmn
