#include "cmn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "cmn/errors.hpp"

namespace cmn {

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
    return sum;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

void matvec(const Matrix& a, std::span<const double> x, std::span<double> y, bool accumulate) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double v = dot(a.row(r), x);
        y[r] = accumulate ? y[r] + v : v;
    }
}

void matvec_transposed(const Matrix& a, std::span<const double> x, std::span<double> y,
                       bool accumulate) {
    if (!accumulate) std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) axpy(x[r], a.row(r), y);
}

void add_outer(double alpha, std::span<const double> x, std::span<const double> y, Matrix& a) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double scale = alpha * x[r];
        if (scale != 0.0) axpy(scale, y, a.row(r));
    }
}

double squared_norm(std::span<const double> x) { return dot(x, x); }

Vector softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw std::invalid_argument("softmax of an empty vector (empty neighborhood)");
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - peak);
        total += out[k];
    }
    for (double& value : out) value /= total;
    return out;
}

Vector relu(std::span<const double> x) {
    Vector out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
    return out;
}

double softplus(double x) noexcept {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double clip_global_norm(std::span<const std::span<double>> grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be > 0");
    double total = 0.0;
    for (const auto& g : grads) total += squared_norm(g);
    const double norm = std::sqrt(total);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (const auto& g : grads)
            for (double& v : g) v *= scale;
    }
    return norm;
}

void rmsprop_step(std::span<double> param, std::span<const double> grad,
                  std::span<double> accumulator, std::span<double> momentum_buffer,
                  const RmsPropSettings& settings) {
    const std::size_t n = param.size();
    if (grad.size() != n || accumulator.size() != n || momentum_buffer.size() != n) {
        throw ShapeError("rmsprop_step: parameter has " + std::to_string(n) +
                         " values but gradient/state have " + std::to_string(grad.size()) + "/" +
                         std::to_string(accumulator.size()) + "/" +
                         std::to_string(momentum_buffer.size()));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double g = grad[k];
        accumulator[k] = settings.decay * accumulator[k] + (1.0 - settings.decay) * g * g;
        momentum_buffer[k] = settings.momentum * momentum_buffer[k] +
                             settings.learning_rate * g / std::sqrt(accumulator[k] + settings.epsilon);
        param[k] -= momentum_buffer[k];
    }
}

Matrix he_init(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t seed) {
    if (fan_in == 0) throw std::invalid_argument("he_init: fan_in must be > 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Matrix m(rows, cols);
    for (double& v : m.values()) v = normal(rng);
    return m;
}

bool all_finite(std::span<const double> x) noexcept {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace cmn
