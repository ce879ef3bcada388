#include "nullaudit/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "nullaudit/error.hpp"
#include "nullaudit/geo.hpp"
#include "nullaudit/stats.hpp"
#include "nullaudit/text_table.hpp"

namespace nullaudit {

double CoxFit::hazard_ratio() const { return std::exp(beta); }

void validate_survival_data(std::span<const double> times, std::span<const int> events,
                            std::span<const double> scores) {
    if (times.size() != events.size() || times.size() != scores.size())
        throw DataError("LengthMismatch", "survival vectors have different lengths");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0) || !std::isfinite(times[i]))
            throw DataError("NonPositiveTime", "subject " + std::to_string(i) + " has time " +
                                                   std::to_string(times[i]));
        if (events[i] != 0 && events[i] != 1)
            throw DataError("BadEventFlag", "subject " + std::to_string(i) + " has event flag " +
                                                std::to_string(events[i]));
        if (!std::isfinite(scores[i]))
            throw DataError("NonFiniteScore", "subject " + std::to_string(i) + " has a non-finite score");
    }
}

namespace {

/// Subjects grouped by distinct time, latest first, so risk sets grow by
/// appending each group.
std::vector<std::size_t> descending_time_order(std::span<const double> times) {
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
    return order;
}

PartialLikelihood evaluate(std::span<const double> times, std::span<const int> events,
                           std::span<const double> centered, std::span<const std::size_t> order,
                           double beta) {
    double offset = 0.0;
    for (double x : centered) offset = std::max(offset, beta * x);

    PartialLikelihood pl;
    double r0 = 0.0, r1 = 0.0, r2 = 0.0;  // risk-set sums of w, w x, w x^2
    std::size_t i = 0;
    const std::size_t n = order.size();
    while (i < n) {
        const double t = times[order[i]];
        double d0 = 0.0, d1 = 0.0, d2 = 0.0;  // sums over the tied events
        double event_x = 0.0;
        std::size_t deaths = 0;
        std::size_t j = i;
        for (; j < n && times[order[j]] == t; ++j) {
            const double x = centered[order[j]];
            const double w = std::exp(beta * x - offset);
            r0 += w;
            r1 += w * x;
            r2 += w * x * x;
            if (events[order[j]] == 1) {
                ++deaths;
                d0 += w;
                d1 += w * x;
                d2 += w * x * x;
                event_x += x;
            }
        }
        if (deaths > 0) {
            pl.loglik += beta * event_x;
            pl.score += event_x;
            for (std::size_t l = 0; l < deaths; ++l) {
                const double f = static_cast<double>(l) / static_cast<double>(deaths);
                const double s0 = r0 - f * d0;
                const double s1 = r1 - f * d1;
                const double s2 = r2 - f * d2;
                const double m = s1 / s0;
                pl.loglik -= std::log(s0) + offset;
                pl.score -= m;
                pl.information += s2 / s0 - m * m;
            }
        }
        i = j;
    }
    return pl;
}

std::vector<double> centered_scores(std::span<const double> scores) {
    const double m = mean(scores);
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - m;
    return out;
}

}  // namespace

PartialLikelihood efron_partial_likelihood(std::span<const double> times,
                                           std::span<const int> events,
                                           std::span<const double> scores, double beta) {
    validate_survival_data(times, events, scores);
    const auto order = descending_time_order(times);
    const auto centered = centered_scores(scores);
    return evaluate(times, events, centered, order, beta);
}

CoxFit cox_fit(std::span<const double> times, std::span<const int> events,
               std::span<const double> scores, const CoxOptions& options) {
    validate_survival_data(times, events, scores);
    const auto n_events = std::count(events.begin(), events.end(), 1);
    if (n_events < 2)
        throw StatError("TooFewEvents", "Cox fit needs at least 2 events, got " +
                                            std::to_string(n_events));
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    if (*lo == *hi) throw StatError("DegenerateCovariate", "score is constant across subjects");

    const auto order = descending_time_order(times);
    const auto centered = centered_scores(scores);

    CoxFit fit;
    double beta = 0.0;
    auto pl = evaluate(times, events, centered, order, beta);
    if (!(pl.information > 0.0)) throw StatError("DegenerateCovariate", "observed information is not positive");
    // Along a separating direction the information decays exponentially while
    // score/information stays finite, so a vanishing information is the
    // reliable sign of monotone likelihood.
    const double flat_information = 1e-10 * pl.information;
    auto check_flat = [&] {
        if (!(pl.information > flat_information))
            throw StatError("NonConvergence", "information vanished at beta = " + format_real(beta) +
                                                  " (monotone likelihood)");
    };
    for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
        fit.n_iterations = iter;
        check_flat();
        const double full_step = pl.score / pl.information;
        double step = full_step;
        double next_beta = beta + step;
        auto next = evaluate(times, events, centered, order, next_beta);
        int h = 0;
        for (; h < 60 && !(next.loglik >= pl.loglik); ++h) {
            step *= 0.5;
            next_beta = beta + step;
            next = evaluate(times, events, centered, order, next_beta);
        }
        if (h == 60) {
            // no step improves the loglik: either we sit on the optimum to rounding
            // precision, or the loglik has flattened out along a separating direction
            if (std::abs(full_step) < 1e-6) {
                fit.converged = true;
                break;
            }
            throw StatError("NonConvergence", "loglik flat at beta = " + format_real(beta) +
                                                  " with Newton step " + format_real(full_step) +
                                                  " (monotone likelihood)");
        }
        const double dbeta = std::abs(next_beta - beta);
        beta = next_beta;
        pl = next;
        if (std::abs(beta) > options.separation_bound)
            throw StatError("NonConvergence", "|beta| exceeded " + format_real(options.separation_bound) +
                                                  " (monotone likelihood)");
        if (dbeta < options.beta_tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged)
        throw StatError("NonConvergence", "no convergence within " +
                                              std::to_string(options.max_iterations) + " iterations");
    check_flat();

    fit.beta = beta;
    fit.log_partial_likelihood = pl.loglik;
    fit.se = 1.0 / std::sqrt(pl.information);
    fit.wald_z = fit.beta / fit.se;
    fit.wald_p = normal_two_sided_p(fit.wald_z);
    return fit;
}

CoxFit cox_fit(const SurvivalDataset& data, const CoxOptions& options) {
    return cox_fit(data.times, data.events, data.scores, options);
}

ConcordanceResult concordance_index(std::span<const double> times, std::span<const int> events,
                                    std::span<const double> scores) {
    validate_survival_data(times, events, scores);
    const std::size_t n = times.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    ConcordanceResult result;
    for (std::size_t a = 0; a < n; ++a) {
        const auto i = order[a];
        if (events[i] != 1) continue;
        // i is the shorter survivor against every later time, and against
        // censored subjects sharing its time.
        for (std::size_t b = 0; b < n; ++b) {
            const auto j = order[b];
            if (j == i) continue;
            const bool later = times[j] > times[i];
            const bool same_time_censored = times[j] == times[i] && events[j] == 0;
            if (!later && !same_time_censored) continue;
            ++result.n_comparable;
            if (scores[i] > scores[j])
                ++result.n_concordant;
            else if (scores[i] < scores[j])
                ++result.n_discordant;
            else
                ++result.n_tied_score;
        }
    }
    if (result.n_comparable == 0) throw StatError("NoComparablePairs", "no comparable pairs");
    result.c_index = (static_cast<double>(result.n_concordant) +
                      0.5 * static_cast<double>(result.n_tied_score)) /
                     static_cast<double>(result.n_comparable);
    return result;
}

ConcordanceResult concordance_index(const SurvivalDataset& data) {
    return concordance_index(data.times, data.events, data.scores);
}

SurvivalDataset signature_dataset(const ExpressionMatrix& matrix, const GeneSet& set,
                                  const ClinicalTable& clinical, const ScoreOptions& options) {
    SurvivalDataset data;
    for (const auto& row : clinical.rows) {
        data.subject_ids.push_back(row.subject_id);
        data.times.push_back(row.time);
        data.events.push_back(row.event);
    }
    data.scores = gene_set_score(matrix, set, data.subject_ids, options).scores;
    return data;
}

std::pair<CoxFit, ConcordanceResult> signature_survival_statistics(
    const ExpressionMatrix& matrix, const GeneSet& set, const ClinicalTable& clinical,
    const ScoreOptions& options) {
    const auto data = signature_dataset(matrix, set, clinical, options);
    return {cox_fit(data), concordance_index(data)};
}

}  // namespace nullaudit
