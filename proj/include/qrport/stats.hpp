#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qrport {

/// 1-based rank of the type-1 empirical tau-quantile in a sample of n:
/// ceil(tau * n), clamped to [1, n]. A 1e-9 slack absorbs products such
/// as 0.05 * 100 that land a hair above an integer.
std::size_t type1_rank(double tau, std::size_t n);

/// Type-1 (inverse empirical CDF) quantile.
double type1_quantile(std::span<const double> values, double tau);

double sample_mean(std::span<const double> values);

/// (n-1)-denominator standard deviation.
double sample_sd(std::span<const double> values);

/// Sample standard deviation of each column.
Eigen::VectorXd column_sd(const Eigen::MatrixXd& x);

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace qrport
