#include "nullaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "nullaudit/error.hpp"

namespace nullaudit {

std::string_view to_string(CorrelationMethod method) noexcept {
    return method == CorrelationMethod::spearman ? "spearman" : "pearson";
}

CorrelationMethod parse_correlation_method(std::string_view name) {
    if (name == "spearman") return CorrelationMethod::spearman;
    if (name == "pearson") return CorrelationMethod::pearson;
    throw ConfigError("UnknownMethod", "correlation method must be spearman or pearson, got '" +
                                           std::string(name) + "'");
}

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && x[order[j]] == x[order[i]]) ++j;
        // positions i..j-1 (0-based) hold ranks i+1..j
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

double mean(std::span<const double> x) {
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) throw DataError("InsufficientData", "variance needs at least 2 values");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DataError("LengthMismatch", "correlation inputs have lengths " +
                                              std::to_string(x.size()) + " and " +
                                              std::to_string(y.size()));
    if (x.size() < 3)
        throw DataError("InsufficientData",
                        "correlation needs n >= 3, got " + std::to_string(x.size()));
}

std::optional<double> correlation_p(double r, std::size_t n) {
    if (std::abs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1.0 - r * r));
    return student_t_two_sided_p(t, df);
}

}  // namespace

double pearson_coefficient(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw StatError("ZeroVariance", "first input (x) is constant");
    if (syy == 0.0) throw StatError("ZeroVariance", "second input (y) is constant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y) {
    CorrelationResult out;
    out.method = CorrelationMethod::pearson;
    out.r = pearson_coefficient(x, y);
    out.n = x.size();
    out.asymptotic_p = correlation_p(out.r, out.n);
    return out;
}

CorrelationResult spearman_rho(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    CorrelationResult out;
    out.method = CorrelationMethod::spearman;
    out.r = pearson_coefficient(rx, ry);
    out.n = x.size();
    out.asymptotic_p = correlation_p(out.r, out.n);
    return out;
}

CorrelationResult correlate(CorrelationMethod method, std::span<const double> x,
                            std::span<const double> y) {
    return method == CorrelationMethod::spearman ? spearman_rho(x, y) : pearson_r(x, y);
}

std::vector<double> row_variances(const FoldChangeMatrix& fc) {
    if (fc.n_groups() < 2) throw DataError("InsufficientData", "row variance needs >= 2 columns");
    std::vector<double> out(fc.n_genes());
    for (std::size_t i = 0; i < fc.n_genes(); ++i) out[i] = sample_variance(fc.row(i));
    return out;
}

double student_t_two_sided_p(double t, double degrees_of_freedom) {
    if (!std::isfinite(t)) return 0.0;
    boost::math::students_t dist(degrees_of_freedom);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double normal_two_sided_p(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace nullaudit
