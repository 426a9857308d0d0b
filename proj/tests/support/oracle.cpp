#include "support/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace cmn::testing {

OracleResult straight_line_cmn(UserIndex u, ItemIndex i, const CmnParameters& P, Variant variant,
                               const std::vector<UserIndex>& neighbors) {
    const std::size_t d = P.output_weight.cols();
    const std::size_t hops = P.hop_projection.size() + 1;
    const bool relu = variant == Variant::full || variant == Variant::no_attention;
    const bool attention = variant == Variant::full || variant == Variant::linear;
    const auto phi = [relu](double x) { return relu ? std::max(0.0, x) : x; };

    std::vector<double> z(d);
    for (std::size_t k = 0; k < d; ++k) z[k] = P.user_memory(u, k) + P.item_memory(i, k);

    OracleResult result;
    std::vector<double> o(d, 0.0);
    for (std::size_t hop = 1; hop <= hops; ++hop) {
        const std::size_t n = neighbors.size();
        std::vector<double> q(n, 0.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t k = 0; k < d; ++k) q[a] += z[k] * P.user_memory(neighbors[a], k);

        std::vector<double> p(n, 0.0);
        if (n > 0) {
            if (attention) {
                double peak = q[0];
                for (double x : q) peak = std::max(peak, x);
                double total = 0.0;
                for (std::size_t a = 0; a < n; ++a) {
                    p[a] = std::exp(q[a] - peak);
                    total += p[a];
                }
                for (double& x : p) x /= total;
            } else {
                for (double& x : p) x = 1.0 / static_cast<double>(n);
            }
        }
        result.weights.push_back(p);

        std::fill(o.begin(), o.end(), 0.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t k = 0; k < d; ++k) o[k] += p[a] * P.neighbor_memory(neighbors[a], k);

        if (hop < hops) {
            const Matrix& Wh = P.hop_projection[hop - 1];
            const Matrix& bh = P.hop_bias[hop - 1];
            std::vector<double> next(d, 0.0);
            for (std::size_t r = 0; r < d; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) s += Wh(r, c) * z[c];
                next[r] = phi(s + o[r] + bh(0, r));
            }
            z = next;
        }
    }

    double score = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        double a = P.output_bias(0, r);
        for (std::size_t c = 0; c < d; ++c) {
            a += P.latent_projection(r, c) * P.user_memory(u, c) * P.item_memory(i, c);
            a += P.summary_projection(r, c) * o[c];
        }
        score += P.output_weight(0, r) * phi(a);
    }
    result.score = score;
    return result;
}

double pairwise_objective(RankingModel& model, const std::vector<Triplet>& batch, double weight_decay) {
    double loss = 0.0;
    for (const Triplet& t : batch) {
        const double diff = model.score(t.user, t.positive) - model.score(t.user, t.negative);
        loss += std::log1p(std::exp(-diff));
    }
    loss /= static_cast<double>(batch.size());
    double decay = 0.0;
    for (const auto& ref : model.parameters()) {
        if (!ref.decayed) continue;
        for (double v : ref.tensor->values()) decay += v * v;
    }
    return loss + 0.5 * weight_decay * decay;
}

std::vector<TensorCheck> finite_difference_check(RankingModel& model, const std::vector<Triplet>& batch,
                                                 double weight_decay, double step) {
    const BatchGradients analytic = batch_gradients(model, batch, weight_decay);
    std::vector<TensorCheck> checks;
    auto refs = model.parameters();
    for (std::size_t slot = 0; slot < refs.size(); ++slot) {
        const Matrix grad = analytic.grads.to_dense(slot);
        auto values = refs[slot].tensor->values();
        double diff2 = 0.0;
        double a2 = 0.0;
        double n2 = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double original = values[k];
            values[k] = original + step;
            const double up = pairwise_objective(model, batch, weight_decay);
            values[k] = original - step;
            const double down = pairwise_objective(model, batch, weight_decay);
            values[k] = original;
            const double numeric = (up - down) / (2.0 * step);
            const double a = grad.values()[k];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-6});
        checks.push_back({refs[slot].name, std::sqrt(diff2) / denom, std::sqrt(a2)});
    }
    return checks;
}

}  // namespace cmn::testing
