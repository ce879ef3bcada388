#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nullaudit {

struct NullConfig {
    std::size_t n_iterations = 10000;
    std::size_t set_size = 1;
    std::vector<std::string> exclusions;
    std::uint64_t seed = 0;
};

struct NullDistribution {
    std::string statistic_name;
    double observed = 0.0;
    std::vector<double> samples;
    NullConfig config;
    /// Draws replaced because the statistic was undefined on them.
    std::size_t resamples = 0;
};

enum class Tail {
    two_sided,    // |s| >= |observed|
    upper,        // s >= observed
    upper_abs,    // |s| >= |observed|, reported as a one-sided test on magnitudes
};

std::string_view to_string(Tail tail) noexcept;

struct EmpiricalTestResult {
    double observed = 0.0;
    /// Plain proportion n_as_extreme / n_iterations.
    double p = 0.0;
    /// (n_as_extreme + 1) / (n_iterations + 1), for comparison only.
    double p_smoothed = 0.0;
    std::size_t n_iterations = 0;
    std::size_t n_as_extreme = 0;
    Tail tail = Tail::two_sided;
};

/// Universe minus exclusions, in universe order. Exclusions match
/// case-insensitively. Throws DataError("UniverseTooSmall") when fewer than
/// config.set_size genes remain, ConfigError on a zero set size or
/// iteration count.
class GeneSampler {
public:
    GeneSampler(std::span<const std::string> universe, NullConfig config);

    const NullConfig& config() const noexcept { return config_; }
    /// Universe positions that may be drawn.
    const std::vector<std::size_t>& pool() const noexcept { return pool_; }

    /// Universe positions of draw `index`, attempt `attempt` (attempt > 0
    /// replaces a draw the statistic rejected). Ascending.
    std::vector<std::size_t> draw(std::size_t index, std::size_t attempt = 0) const;

private:
    NullConfig config_;
    std::vector<std::size_t> pool_;
};

/// n_iterations random gene sets, as symbols in ascending universe order.
std::vector<std::vector<std::string>> sample_gene_sets(std::span<const std::string> universe,
                                                       const NullConfig& config);

struct EngineOptions {
    std::size_t workers = 1;
    /// How many times one draw may be replaced after the statistic throws a
    /// degenerate StatError (constant covariate, failed fit). Zero means
    /// the error propagates, tagged with the draw index.
    std::size_t max_resamples_per_draw = 0;
};

/// Statistic over one sampled set, given as universe positions.
using SetStatistic = std::function<double(std::span<const std::size_t>)>;
/// Vector-valued variant: writes one value per named statistic into `out`.
using MultiSetStatistic = std::function<void(std::span<const std::size_t>, std::span<double> out)>;

/// samples[i] = statistic(set_i). `observed` is left for the caller.
NullDistribution null_distribution(std::string statistic_name, const SetStatistic& statistic,
                                   std::span<const std::string> universe, const NullConfig& config,
                                   const EngineOptions& options = {});

/// Several statistics evaluated on the same draws; one distribution per name.
std::vector<NullDistribution> null_distributions(std::vector<std::string> statistic_names,
                                                 const MultiSetStatistic& statistic,
                                                 std::span<const std::string> universe,
                                                 const NullConfig& config,
                                                 const EngineOptions& options = {});

EmpiricalTestResult empirical_p(double observed, const NullDistribution& null, Tail tail);
EmpiricalTestResult empirical_p_two_sided(double observed, const NullDistribution& null);

}  // namespace nullaudit
