#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cmn {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles. Vectors that live alongside matrices
/// (output weight, biases) are stored as 1 x d matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double value);

    static Matrix identity(std::size_t n);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// y = A x (+ y when accumulate)
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y, bool accumulate = false);

// y = A^T x (+ y when accumulate)
void matvec_transposed(const Matrix& a, std::span<const double> x, std::span<double> y,
                       bool accumulate = false);

// A += alpha * x y^T
void add_outer(double alpha, std::span<const double> x, std::span<const double> y, Matrix& a);

double squared_norm(std::span<const double> x);

/// Numerically stable softmax (max-subtracted). Throws std::invalid_argument
/// on empty input: an empty neighborhood has to be handled by the caller.
Vector softmax(std::span<const double> logits);

Vector relu(std::span<const double> x);

/// Subgradient convention: 1 for x > 0, 0 otherwise (including x == 0).
inline double relu_derivative(double x) noexcept { return x > 0.0 ? 1.0 : 0.0; }

/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

double sigmoid(double x) noexcept;

/// Scales every gradient by max_norm / global_norm when the global L2 norm
/// across all of them exceeds max_norm. Returns the norm before clipping.
double clip_global_norm(std::span<const std::span<double>> grads, double max_norm);

struct RmsPropSettings {
    double learning_rate = 1e-3;
    double decay = 0.9;
    double momentum = 0.9;
    double epsilon = 1e-8;

    friend bool operator==(const RmsPropSettings&, const RmsPropSettings&) = default;
};

/// RMSProp with a momentum buffer:
///   acc <- decay*acc + (1-decay)*g^2
///   mom <- momentum*mom + lr*g/sqrt(acc+eps)
///   p   <- p - mom
/// All four spans must have identical length (ShapeError otherwise).
void rmsprop_step(std::span<double> param, std::span<const double> grad,
                  std::span<double> accumulator, std::span<double> momentum_buffer,
                  const RmsPropSettings& settings);

/// i.i.d. N(0, 2/fan_in) samples, deterministic for a given seed.
Matrix he_init(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t seed);

bool all_finite(std::span<const double> x) noexcept;

}  // namespace cmn
