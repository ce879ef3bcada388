#include "nullaudit/null_engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "nullaudit/error.hpp"
#include "nullaudit/expression.hpp"
#include "nullaudit/random.hpp"

namespace nullaudit {

std::string_view to_string(Tail tail) noexcept {
    switch (tail) {
        case Tail::two_sided: return "two_sided";
        case Tail::upper: return "upper";
        case Tail::upper_abs: return "upper_abs";
    }
    return "unknown";
}

GeneSampler::GeneSampler(std::span<const std::string> universe, NullConfig config)
    : config_(std::move(config)) {
    if (config_.n_iterations == 0)
        throw ConfigError("InvalidNullConfig", "n_iterations must be positive");
    if (config_.set_size == 0) throw ConfigError("InvalidNullConfig", "set_size must be positive");

    std::set<std::string> excluded;
    for (const auto& g : config_.exclusions) excluded.insert(normalize_symbol(g));
    for (std::size_t i = 0; i < universe.size(); ++i) {
        if (!excluded.contains(normalize_symbol(universe[i]))) pool_.push_back(i);
    }
    if (pool_.size() < config_.set_size)
        throw DataError("UniverseTooSmall", "set size " + std::to_string(config_.set_size) +
                                                " exceeds the " + std::to_string(pool_.size()) +
                                                " genes available after exclusions");
}

std::vector<std::size_t> GeneSampler::draw(std::size_t index, std::size_t attempt) const {
    auto rng = draw_stream(config_.seed, index);
    std::vector<std::size_t> picks;
    for (std::size_t a = 0; a <= attempt; ++a)
        picks = sample_without_replacement(rng, pool_.size(), config_.set_size);
    for (auto& p : picks) p = pool_[p];
    return picks;
}

std::vector<std::vector<std::string>> sample_gene_sets(std::span<const std::string> universe,
                                                       const NullConfig& config) {
    GeneSampler sampler(universe, config);
    std::vector<std::vector<std::string>> sets;
    sets.reserve(config.n_iterations);
    for (std::size_t i = 0; i < config.n_iterations; ++i) {
        std::vector<std::string> set;
        for (auto idx : sampler.draw(i)) set.push_back(universe[idx]);
        sets.push_back(std::move(set));
    }
    return sets;
}

namespace {

struct ChunkOutcome {
    std::size_t resamples = 0;
    std::size_t failed_index = std::numeric_limits<std::size_t>::max();
    std::exception_ptr error;
};

ChunkOutcome run_chunk(const GeneSampler& sampler, const MultiSetStatistic& statistic,
                       std::size_t width, std::size_t begin, std::size_t end,
                       std::size_t max_resamples, std::vector<double>& values) {
    ChunkOutcome outcome;
    for (std::size_t i = begin; i < end; ++i) {
        std::span<double> out(values.data() + i * width, width);
        for (std::size_t attempt = 0;; ++attempt) {
            try {
                statistic(sampler.draw(i, attempt), out);
                for (double v : out) {
                    if (!std::isfinite(v))
                        throw StatError("NonFiniteStatistic", "statistic is not finite");
                }
                break;
            } catch (const Error& e) {
                if (e.degenerate() && attempt < max_resamples) {
                    ++outcome.resamples;
                    continue;
                }
                outcome.failed_index = i;
                outcome.error = e.with_context("null draw " + std::to_string(i));
                return outcome;
            } catch (...) {
                outcome.failed_index = i;
                outcome.error = std::current_exception();
                return outcome;
            }
        }
    }
    return outcome;
}

}  // namespace

std::vector<NullDistribution> null_distributions(std::vector<std::string> statistic_names,
                                                 const MultiSetStatistic& statistic,
                                                 std::span<const std::string> universe,
                                                 const NullConfig& config,
                                                 const EngineOptions& options) {
    const GeneSampler sampler(universe, config);
    const std::size_t n = config.n_iterations;
    const std::size_t width = statistic_names.size();
    std::vector<double> values(n * width);

    // Contiguous chunks: each worker stops at its first failure, so the
    // lowest failing index across workers is the sequential first failure.
    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, n);
    std::vector<ChunkOutcome> outcomes(workers);
    if (workers == 1) {
        outcomes[0] = run_chunk(sampler, statistic, width, 0, n,
                                options.max_resamples_per_draw, values);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = n * w / workers;
            const std::size_t end = n * (w + 1) / workers;
            threads.emplace_back([&, w, begin, end] {
                outcomes[w] = run_chunk(sampler, statistic, width, begin, end,
                                        options.max_resamples_per_draw, values);
            });
        }
        for (auto& t : threads) t.join();
    }

    std::size_t resamples = 0;
    const ChunkOutcome* first_failure = nullptr;
    for (const auto& o : outcomes) {
        resamples += o.resamples;
        if (o.error && (!first_failure || o.failed_index < first_failure->failed_index))
            first_failure = &o;
    }
    if (first_failure) std::rethrow_exception(first_failure->error);

    std::vector<NullDistribution> out(width);
    for (std::size_t k = 0; k < width; ++k) {
        out[k].statistic_name = std::move(statistic_names[k]);
        out[k].config = config;
        out[k].resamples = resamples;
        out[k].samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[k].samples[i] = values[i * width + k];
    }
    return out;
}

NullDistribution null_distribution(std::string statistic_name, const SetStatistic& statistic,
                                   std::span<const std::string> universe, const NullConfig& config,
                                   const EngineOptions& options) {
    auto wrapped = [&statistic](std::span<const std::size_t> set, std::span<double> out) {
        out[0] = statistic(set);
    };
    auto result = null_distributions({std::move(statistic_name)}, wrapped, universe, config, options);
    return std::move(result.front());
}

EmpiricalTestResult empirical_p(double observed, const NullDistribution& null, Tail tail) {
    if (null.samples.empty())
        throw DataError("EmptyNull", "null distribution '" + null.statistic_name + "' has no samples");
    EmpiricalTestResult result;
    result.observed = observed;
    result.tail = tail;
    result.n_iterations = null.samples.size();
    const double threshold = tail == Tail::upper ? observed : std::abs(observed);
    for (double s : null.samples) {
        const double value = tail == Tail::upper ? s : std::abs(s);
        if (value >= threshold) ++result.n_as_extreme;
    }
    const auto n = static_cast<double>(result.n_iterations);
    const auto b = static_cast<double>(result.n_as_extreme);
    result.p = b / n;
    result.p_smoothed = (b + 1.0) / (n + 1.0);
    return result;
}

EmpiricalTestResult empirical_p_two_sided(double observed, const NullDistribution& null) {
    return empirical_p(observed, null, Tail::two_sided);
}

}  // namespace nullaudit
