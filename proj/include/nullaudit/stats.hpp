#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nullaudit/expression.hpp"

namespace nullaudit {

enum class CorrelationMethod { spearman, pearson };

std::string_view to_string(CorrelationMethod method) noexcept;
/// Throws ConfigError for anything but "spearman" / "pearson".
CorrelationMethod parse_correlation_method(std::string_view name);

struct CorrelationResult {
    CorrelationMethod method = CorrelationMethod::pearson;
    double r = 0.0;
    std::size_t n = 0;
    /// t-approximation with n - 2 degrees of freedom. Informational only;
    /// verdicts never use it.
    std::optional<double> asymptotic_p;
};

/// Ranks 1..n; tied values share the mean of the positions they cover.
std::vector<double> average_ranks(std::span<const double> x);

double mean(std::span<const double> x);
/// Two-pass sample variance (n - 1 denominator).
double sample_variance(std::span<const double> x);

/// Product-moment coefficient only, for hot loops. Same preconditions and
/// errors as pearson_r.
double pearson_coefficient(std::span<const double> x, std::span<const double> y);

CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y);
CorrelationResult spearman_rho(std::span<const double> x, std::span<const double> y);
CorrelationResult correlate(CorrelationMethod method, std::span<const double> x,
                            std::span<const double> y);

/// Variance of every row, aligned with fc.gene_ids(). Needs >= 2 groups.
std::vector<double> row_variances(const FoldChangeMatrix& fc);

/// Two-sided p of a Student t statistic.
double student_t_two_sided_p(double t, double degrees_of_freedom);
/// Two-sided p of a standard normal statistic.
double normal_two_sided_p(double z);

}  // namespace nullaudit
