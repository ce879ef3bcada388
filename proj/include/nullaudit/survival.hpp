#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nullaudit/expression.hpp"

namespace nullaudit {

struct ClinicalTable;

/// Aligned per-subject vectors. Higher score means higher risk.
struct SurvivalDataset {
    std::vector<std::string> subject_ids;
    std::vector<double> scores;
    std::vector<double> times;  // > 0, units as supplied
    std::vector<int> events;    // 1 = event observed, 0 = censored

    std::size_t size() const noexcept { return times.size(); }
};

struct CoxOptions {
    std::size_t max_iterations = 50;
    double beta_tolerance = 1e-8;
    /// |beta| beyond this is treated as separation.
    double separation_bound = 50.0;
};

struct CoxFit {
    double beta = 0.0;  // log hazard ratio per unit score
    double se = 0.0;
    double wald_z = 0.0;
    double wald_p = 1.0;
    double log_partial_likelihood = 0.0;
    bool converged = false;
    std::size_t n_iterations = 0;

    double hazard_ratio() const;
};

struct ConcordanceResult {
    double c_index = 0.5;
    std::size_t n_concordant = 0;
    std::size_t n_discordant = 0;
    std::size_t n_tied_score = 0;
    std::size_t n_comparable = 0;
};

/// Efron log partial likelihood with its first two derivatives at `beta`.
struct PartialLikelihood {
    double loglik = 0.0;
    double score = 0.0;        // d loglik / d beta
    double information = 0.0;  // -d2 loglik / d beta2
};

/// Checks lengths, time > 0, event flags, unique ids. Throws DataError.
void validate_survival_data(std::span<const double> times, std::span<const int> events,
                            std::span<const double> scores);

/// Univariate Cox fit under the Efron tie approximation by Newton-Raphson
/// from beta = 0 with step halving. Errors: StatError DegenerateCovariate,
/// TooFewEvents, NonConvergence.
CoxFit cox_fit(std::span<const double> times, std::span<const int> events,
               std::span<const double> scores, const CoxOptions& options = {});
CoxFit cox_fit(const SurvivalDataset& data, const CoxOptions& options = {});

PartialLikelihood efron_partial_likelihood(std::span<const double> times,
                                           std::span<const int> events,
                                           std::span<const double> scores, double beta);

/// Harrell's c. A pair is comparable when the subject with the earlier time
/// had the event (or, at equal times, exactly one of them did); it is
/// concordant when that subject has the strictly higher score, and ties in
/// score count one half. Throws StatError("NoComparablePairs").
ConcordanceResult concordance_index(std::span<const double> times, std::span<const int> events,
                                    std::span<const double> scores);
ConcordanceResult concordance_index(const SurvivalDataset& data);

/// Mean-expression score of `set` per clinical subject, then Cox fit and
/// concordance. Subjects map to matrix samples by subject id.
std::pair<CoxFit, ConcordanceResult> signature_survival_statistics(
    const ExpressionMatrix& matrix, const GeneSet& set, const ClinicalTable& clinical,
    const ScoreOptions& options = {});

/// The dataset signature_survival_statistics fits.
SurvivalDataset signature_dataset(const ExpressionMatrix& matrix, const GeneSet& set,
                                  const ClinicalTable& clinical, const ScoreOptions& options = {});

}  // namespace nullaudit
