#include "cmn/model.hpp"

#include <cmath>

#include "cmn/errors.hpp"

namespace cmn {
namespace {

void activate(std::span<double> x, Variant variant) {
    if (!uses_relu(variant)) return;
    for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void require_dim(std::span<const double> x, std::size_t d, const char* what) {
    if (x.size() != d) {
        throw ShapeError(std::string(what) + ": expected length " + std::to_string(d) + ", got " +
                         std::to_string(x.size()));
    }
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(name + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

std::string_view to_string(Variant variant) {
    switch (variant) {
        case Variant::full: return "full";
        case Variant::no_attention: return "no_attention";
        case Variant::linear: return "linear";
        case Variant::linear_no_attention: return "linear_no_attention";
    }
    return "full";
}

Variant parse_variant(std::string_view text) {
    for (Variant v : {Variant::full, Variant::no_attention, Variant::linear, Variant::linear_no_attention})
        if (text == to_string(v)) return v;
    throw ConfigError("unknown variant '" + std::string(text) +
                      "' (expected full, no_attention, linear or linear_no_attention)");
}

CmnParameters CmnParameters::zeros(std::size_t users, std::size_t items, std::size_t dim, std::size_t hops) {
    if (hops < 1) throw ConfigError("hops must be >= 1");
    CmnParameters p;
    p.user_memory = Matrix(users, dim);
    p.item_memory = Matrix(items, dim);
    p.neighbor_memory = Matrix(users, dim);
    p.latent_projection = Matrix(dim, dim);
    p.summary_projection = Matrix(dim, dim);
    p.output_weight = Matrix(1, dim);
    p.output_bias = Matrix(1, dim);
    for (std::size_t h = 1; h < hops; ++h) {
        p.hop_projection.emplace_back(dim, dim);
        p.hop_bias.emplace_back(1, dim);
    }
    return p;
}

CmnParameters CmnParameters::initialized(std::size_t users, std::size_t items, std::size_t dim, std::size_t hops,
                                         std::uint64_t seed) {
    CmnParameters p = zeros(users, items, dim, hops);
    // Distinct, fixed sub-seeds per tensor keep initialisation independent of
    // the order tensors are listed in.
    std::uint64_t stream = seed * 0x9E3779B97F4A7C15ULL;
    const auto next = [&stream] { return stream += 0xD1B54A32D192ED03ULL; };
    p.user_memory = he_init(users, dim, dim, next());
    p.item_memory = he_init(items, dim, dim, next());
    p.neighbor_memory = he_init(users, dim, dim, next());
    p.latent_projection = he_init(dim, dim, dim, next());
    p.summary_projection = he_init(dim, dim, dim, next());
    p.output_weight = he_init(1, dim, dim, next());
    for (auto& w : p.hop_projection) w = he_init(dim, dim, dim, next());
    return p;
}

void CmnParameters::validate() const {
    const std::size_t d = dim();
    const std::size_t users = user_memory.rows();
    if (d == 0) throw ShapeError("embedding size must be positive");
    require_shape(user_memory, users, d, "M");
    require_shape(item_memory, item_memory.rows(), d, "E");
    require_shape(neighbor_memory, users, d, "C");
    require_shape(latent_projection, d, d, "U");
    require_shape(summary_projection, d, d, "W");
    require_shape(output_weight, 1, d, "v");
    require_shape(output_bias, 1, d, "b");
    if (hop_bias.size() != hop_projection.size()) throw ShapeError("hop projection/bias count mismatch");
    for (std::size_t h = 0; h < hop_projection.size(); ++h) {
        require_shape(hop_projection[h], d, d, "W" + std::to_string(h + 1));
        require_shape(hop_bias[h], 1, d, "b" + std::to_string(h + 1));
    }
    for (const Matrix* m : {&user_memory, &item_memory, &neighbor_memory, &latent_projection, &summary_projection,
                            &output_weight, &output_bias})
        if (!all_finite(m->values())) throw ShapeError("parameters contain non-finite values");
}

std::vector<ParameterRef> parameter_refs(CmnParameters& params) {
    std::vector<ParameterRef> refs{
        {"M", &params.user_memory, true, false},
        {"E", &params.item_memory, true, false},
        {"C", &params.neighbor_memory, true, false},
        {"U", &params.latent_projection, false, true},
        {"W", &params.summary_projection, false, true},
        {"v", &params.output_weight, false, true},
        {"b", &params.output_bias, false, true},
    };
    for (std::size_t h = 0; h < params.hop_projection.size(); ++h) {
        refs.push_back({"W" + std::to_string(h + 1), &params.hop_projection[h], false, true});
        refs.push_back({"b" + std::to_string(h + 1), &params.hop_bias[h], false, true});
    }
    return refs;
}

std::vector<UserIndex> neighborhood_for(UserIndex u, ItemIndex i, const NeighborIndex& index, bool exclude_self) {
    const auto users = index.neighbors(i);
    std::vector<UserIndex> out;
    out.reserve(users.size());
    for (UserIndex v : users)
        if (!(exclude_self && v == u)) out.push_back(v);
    return out;
}

Vector initial_query(UserIndex u, ItemIndex i, const CmnParameters& params) {
    if (u >= params.user_count() || i >= params.item_count()) {
        throw std::out_of_range("initial_query: user " + std::to_string(u) + " / item " + std::to_string(i) +
                                " out of range");
    }
    const auto mu = params.user_memory.row(u);
    const auto ei = params.item_memory.row(i);
    Vector z(mu.begin(), mu.end());
    axpy(1.0, ei, z);
    return z;
}

Vector preference_query(std::span<const double> query, std::span<const UserIndex> neighbors,
                        const CmnParameters& params) {
    require_dim(query, params.dim(), "preference_query");
    Vector q(neighbors.size());
    for (std::size_t k = 0; k < neighbors.size(); ++k) q[k] = dot(query, params.user_memory.row(neighbors[k]));
    return q;
}

Vector attention_weights(std::span<const double> logits, Variant variant) {
    if (logits.empty()) return {};
    if (uses_attention(variant)) return softmax(logits);
    return Vector(logits.size(), 1.0 / static_cast<double>(logits.size()));
}

Vector neighborhood_summary(std::span<const double> weights, std::span<const UserIndex> neighbors,
                            const CmnParameters& params) {
    if (weights.size() != neighbors.size()) {
        throw ShapeError("neighborhood_summary: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(neighbors.size()) + " neighbors");
    }
    Vector o(params.dim(), 0.0);
    for (std::size_t k = 0; k < neighbors.size(); ++k) axpy(weights[k], params.neighbor_memory.row(neighbors[k]), o);
    return o;
}

Vector hop_update(std::span<const double> previous_query, std::span<const double> summary, std::size_t hop_index,
                  const CmnParameters& params, Variant variant) {
    if (hop_index < 1 || hop_index > params.hop_projection.size()) {
        throw std::out_of_range("hop_update: hop index " + std::to_string(hop_index) + " outside [1, " +
                                std::to_string(params.hop_projection.size()) + "]");
    }
    const std::size_t d = params.dim();
    require_dim(previous_query, d, "hop_update query");
    require_dim(summary, d, "hop_update summary");
    Vector z(d);
    matvec(params.hop_projection[hop_index - 1], previous_query, z);
    axpy(1.0, summary, z);
    axpy(1.0, params.hop_bias[hop_index - 1].row(0), z);
    activate(z, variant);
    return z;
}

namespace {

Vector output_activation(std::span<const double> latent, std::span<const double> final_summary,
                         const CmnParameters& params) {
    Vector a(params.dim());
    matvec(params.latent_projection, latent, a);
    matvec(params.summary_projection, final_summary, a, true);
    axpy(1.0, params.output_bias.row(0), a);
    return a;
}

Vector hadamard(std::span<const double> a, std::span<const double> b) {
    Vector out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
    return out;
}

}  // namespace

double score(UserIndex u, ItemIndex i, std::span<const double> final_summary, const CmnParameters& params,
             Variant variant) {
    require_dim(final_summary, params.dim(), "score");
    const Vector latent = hadamard(params.user_memory.row(u), params.item_memory.row(i));
    Vector a = output_activation(latent, final_summary, params);
    activate(a, variant);
    return dot(params.output_weight.row(0), a);
}

ForwardState forward_state(UserIndex u, ItemIndex i, const CmnParameters& params, const ModelConfig& config,
                           const NeighborIndex& index) {
    const std::size_t hops = params.hops();
    ForwardState s;
    s.neighbors = neighborhood_for(u, i, index, config.exclude_self);
    s.queries.reserve(hops);
    s.queries.push_back(initial_query(u, i, params));
    for (std::size_t h = 1; h <= hops; ++h) {
        const Vector q = preference_query(s.queries.back(), s.neighbors, params);
        s.weights.push_back(attention_weights(q, config.variant));
        s.summaries.push_back(neighborhood_summary(s.weights.back(), s.neighbors, params));
        if (h < hops) {
            Vector pre(params.dim());
            matvec(params.hop_projection[h - 1], s.queries.back(), pre);
            axpy(1.0, s.summaries.back(), pre);
            axpy(1.0, params.hop_bias[h - 1].row(0), pre);
            Vector z = pre;
            activate(z, config.variant);
            s.hop_activations.push_back(std::move(pre));
            s.queries.push_back(std::move(z));
        }
    }
    s.latent = hadamard(params.user_memory.row(u), params.item_memory.row(i));
    s.output_activation = output_activation(s.latent, s.summaries.back(), params);
    Vector out = s.output_activation;
    activate(out, config.variant);
    s.score = dot(params.output_weight.row(0), out);
    return s;
}

ForwardResult forward(UserIndex u, ItemIndex i, const CmnParameters& params, const ModelConfig& config,
                      const NeighborIndex& index) {
    ForwardState s = forward_state(u, i, params, config, index);
    ForwardResult result{s.score, {}};
    result.trace.hops.reserve(s.weights.size());
    for (auto& w : s.weights) result.trace.hops.push_back({s.neighbors, std::move(w)});
    return result;
}

double score_gmf(std::span<const double> user, std::span<const double> item, std::span<const double> output_weight,
                 bool relu) {
    double r = 0.0;
    for (std::size_t k = 0; k < user.size(); ++k) {
        double x = user[k] * item[k];
        if (relu && x < 0.0) x = 0.0;
        r += output_weight[k] * x;
    }
    return r;
}

double score_gmf(UserIndex u, ItemIndex i, const CmnParameters& params) {
    return score_gmf(params.user_memory.row(u), params.item_memory.row(i), params.output_weight.row(0), true);
}

double score_fism_user(UserIndex u, ItemIndex i, const Matrix& neighbor_memory, const NeighborIndex& index,
                       double rho) {
    const auto cu = neighbor_memory.row(u);
    double sum = 0.0;
    std::size_t count = 0;
    for (UserIndex v : index.neighbors(i)) {
        if (v == u) continue;
        sum += dot(cu, neighbor_memory.row(v));
        ++count;
    }
    if (count == 0) return 0.0;
    return std::pow(static_cast<double>(count), -rho) * sum;
}

}  // namespace cmn
