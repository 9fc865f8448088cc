#include "qrport/stats.hpp"

#include <algorithm>
#include <cmath>

#include "qrport/errors.hpp"

namespace qrport {

std::size_t type1_rank(double tau, std::size_t n) {
    const double k = std::ceil(tau * static_cast<double>(n) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1.0)), 1, n);
}

double type1_quantile(std::span<const double> values, double tau) {
    if (values.empty()) throw UsageError("quantile of an empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    const std::size_t k = type1_rank(tau, sorted.size());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
    return sorted[k - 1];
}

double sample_mean(std::span<const double> values) {
    if (values.empty()) throw UsageError("mean of an empty sample");
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) throw UsageError("standard deviation needs at least 2 observations");
    const double mean = sample_mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

Eigen::VectorXd column_sd(const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Eigen::VectorXd col = x.col(j);
        out(j) = sample_sd(as_span(col));
    }
    return out;
}

}  // namespace qrport
