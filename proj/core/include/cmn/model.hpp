#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmn/data.hpp"
#include "cmn/numerics.hpp"

namespace cmn {

/// Architecture ablations. "no_attention" replaces the softmax with uniform
/// 1/|N(i)| weights; the linear variants swap every ReLU for the identity.
enum class Variant { full, no_attention, linear, linear_no_attention };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);  // throws ConfigError

constexpr bool uses_attention(Variant v) noexcept {
    return v == Variant::full || v == Variant::linear;
}
constexpr bool uses_relu(Variant v) noexcept {
    return v == Variant::full || v == Variant::no_attention;
}

struct ModelConfig {
    std::size_t dim = 50;
    std::size_t hops = 2;
    Variant variant = Variant::full;
    /// Drop the target user from N(i) before addressing the memory.
    bool exclude_self = false;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// All learnable tensors of a collaborative memory network. The three
/// embedding tables are shared by every hop; hop projections are per hop.
struct CmnParameters {
    Matrix user_memory;          // M   (P x d)
    Matrix item_memory;          // E   (Q x d)
    Matrix neighbor_memory;      // C   (P x d), read through attention
    Matrix latent_projection;    // U   (d x d), applied to m_u * e_i
    Matrix summary_projection;   // W   (d x d), applied to the neighborhood summary
    Matrix output_weight;        // v   (1 x d)
    Matrix output_bias;          // b   (1 x d)
    std::vector<Matrix> hop_projection;  // W^h (d x d), h = 1..H-1
    std::vector<Matrix> hop_bias;        // b^h (1 x d)

    static CmnParameters zeros(std::size_t users, std::size_t items, std::size_t dim, std::size_t hops);

    /// He-normal weights (fan_in = d) for every table and projection, zero biases.
    static CmnParameters initialized(std::size_t users, std::size_t items, std::size_t dim, std::size_t hops,
                                     std::uint64_t seed);

    std::size_t dim() const noexcept { return output_weight.cols(); }
    std::size_t hops() const noexcept { return hop_projection.size() + 1; }
    std::size_t user_count() const noexcept { return user_memory.rows(); }
    std::size_t item_count() const noexcept { return item_memory.rows(); }

    /// Throws ShapeError when any tensor disagrees with d, P, Q or H.
    void validate() const;
};

/// Role of a tensor in training.
struct ParameterRef {
    std::string name;
    Matrix* tensor;
    bool row_sparse;  // embedding table: gradients and updates are per touched row
    bool decayed;     // receives l2 weight decay
};

std::vector<ParameterRef> parameter_refs(CmnParameters& params);

struct HopAttention {
    std::vector<UserIndex> neighbors;
    Vector weights;
};

/// Per-hop attention over the neighborhood for one (user, item) query.
struct AttentionTrace {
    std::vector<HopAttention> hops;
};

/// N(i), minus u when exclude_self is set.
std::vector<UserIndex> neighborhood_for(UserIndex u, ItemIndex i, const NeighborIndex& index, bool exclude_self);

Vector initial_query(UserIndex u, ItemIndex i, const CmnParameters& params);

/// q_v = z . m_v for each neighbor, in neighbor order.
Vector preference_query(std::span<const double> query, std::span<const UserIndex> neighbors,
                        const CmnParameters& params);

/// Softmax for attention variants, uniform weights otherwise. Empty in, empty out.
Vector attention_weights(std::span<const double> logits, Variant variant);

/// o = sum_v p_v c_v; the zero vector for an empty neighborhood.
Vector neighborhood_summary(std::span<const double> weights, std::span<const UserIndex> neighbors,
                            const CmnParameters& params);

/// z^h = phi(W^h z^{h-1} + o^h + b^h) for 1 <= hop_index <= H-1.
Vector hop_update(std::span<const double> previous_query, std::span<const double> summary, std::size_t hop_index,
                  const CmnParameters& params, Variant variant);

/// r = v . phi(U (m_u * e_i) + W o + b).
double score(UserIndex u, ItemIndex i, std::span<const double> final_summary, const CmnParameters& params,
             Variant variant);

/// Every intermediate of one forward pass; consumed by backpropagation.
struct ForwardState {
    std::vector<UserIndex> neighbors;
    std::vector<Vector> queries;          // z^0 .. z^{H-1}
    std::vector<Vector> hop_activations;  // pre-activation of z^1 .. z^{H-1}
    std::vector<Vector> weights;          // p^1 .. p^H
    std::vector<Vector> summaries;        // o^1 .. o^H
    Vector latent;                        // m_u * e_i
    Vector output_activation;             // U latent + W o^H + b
    double score = 0.0;
};

ForwardState forward_state(UserIndex u, ItemIndex i, const CmnParameters& params, const ModelConfig& config,
                           const NeighborIndex& index);

struct ForwardResult {
    double score;
    AttentionTrace trace;
};

ForwardResult forward(UserIndex u, ItemIndex i, const CmnParameters& params, const ModelConfig& config,
                      const NeighborIndex& index);

/// v . phi(m_u * e_i); relu selects phi = ReLU, otherwise identity.
double score_gmf(std::span<const double> user, std::span<const double> item, std::span<const double> output_weight,
                 bool relu = true);
double score_gmf(UserIndex u, ItemIndex i, const CmnParameters& params);

/// |N'(i)|^-rho * sum_{v in N'(i)} c_u . c_v with N'(i) = N(i) \ {u}; 0 when N'(i) is empty.
double score_fism_user(UserIndex u, ItemIndex i, const Matrix& neighbor_memory, const NeighborIndex& index,
                       double rho);

}  // namespace cmn
