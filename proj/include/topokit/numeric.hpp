#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "topokit/errors.hpp"

namespace topokit {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) with max subtraction; tolerates -inf operands.
inline double log_add(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

inline double log_sum_exp(std::span<const double> xs) {
    double hi = kLogZero;
    for (double x : xs) hi = std::max(hi, x);
    if (hi == kLogZero) return kLogZero;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

// Dense row-major matrix of doubles. Used for logits, gradients and any
// intermediate the DP kernel accumulates; file-facing score matrices are
// float (see emission.hpp).
struct MatrixD {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    MatrixD() = default;
    MatrixD(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {v.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {v.data() + r * cols, cols}; }
};

// Per-row log-softmax, in place.
inline void log_softmax_rows(MatrixD& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        auto row = m.row(r);
        const double z = log_sum_exp(row);
        for (double& x : row) x -= z;
    }
}

inline MatrixD log_softmax_copy(const MatrixD& logits) {
    MatrixD out = logits;
    log_softmax_rows(out);
    return out;
}

inline bool rows_normalized(const MatrixD& m, double tol = 1e-6) {
    for (std::size_t r = 0; r < m.rows; ++r)
        if (std::abs(log_sum_exp(m.row(r))) > tol) return false;
    return true;
}

}  // namespace topokit
