#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nullaudit/config.hpp"
#include "nullaudit/expression.hpp"
#include "nullaudit/geo.hpp"
#include "nullaudit/null_engine.hpp"

namespace nullaudit {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

enum class Verdict { supported, refuted, inconclusive };

std::string_view to_string(Verdict verdict) noexcept;

struct MetricOutcome {
    std::string metric;     // correlation, c_index, abs_log_hr
    std::string statistic;  // e.g. spearman_rho
    double observed = 0.0;
    EmpiricalTestResult empirical;
    bool significant = false;
    std::optional<double> asymptotic_p;
};

/// All significant -> Supported, none -> Refuted, otherwise Inconclusive.
/// Throws DataError("NoMetrics") on an empty list.
Verdict classify_verdict(std::span<const MetricOutcome> outcomes);
Verdict classify_verdict(std::span<const bool> significant);

/// Points behind the scatter panel of a claim's figure.
struct ObservedData {
    std::string x_label;
    std::string y_label;
    std::vector<std::string> labels;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<int> events;  // survival only
};

struct AuditVerdict {
    std::string claim_id;
    ClaimKind kind = ClaimKind::crossgroup_correlation;
    Verdict verdict = Verdict::refuted;
    double alpha = 0.05;
    std::vector<MetricOutcome> outcomes;
    std::vector<NullDistribution> nulls;  // one per outcome, same order
    ObservedData data;
    nlohmann::json details = nlohmann::json::object();
};

/// A claim with its names resolved against the config.
struct ClaimSpec {
    ClaimConfig config;
    std::optional<GeneSet> score_set;
    std::optional<GeneSet> response_set;
    std::optional<GeneSet> signature;
    std::optional<ContrastSpec> contrast;
};

ClaimSpec resolve_claim(const AuditConfig& config, const ClaimConfig& claim);

struct RunOptions {
    std::size_t workers = 1;
    std::size_t max_resamples_per_draw = 100;
};

AuditVerdict run_crossgroup_correlation(const ClaimSpec& claim, const ExpressionMatrix& matrix,
                                        const std::vector<SampleAnnotation>& annotations,
                                        const RunOptions& options = {});

/// One verdict per candidate, ids "<claim>.<GENE>".
std::vector<AuditVerdict> run_regulator_correlation(const ClaimSpec& claim, const ExpressionMatrix& matrix,
                                                    const std::vector<SampleAnnotation>& annotations,
                                                    const RunOptions& options = {});

AuditVerdict run_survival_signature(const ClaimSpec& claim, const ExpressionMatrix& matrix,
                                    const ClinicalTable& clinical, const RunOptions& options = {});

struct DataFile {
    std::string role;
    std::string path;
    std::string sha256;
};

struct LoadedDataset {
    std::string name;
    std::string accession;
    ExpressionMatrix matrix;
    std::vector<SampleAnnotation> annotations;
    std::optional<ClinicalTable> clinical;
    std::vector<DataFile> files;
    nlohmann::json ingest = nlohmann::json::object();  // collapse counts etc.
};

/// Reads and validates every file the dataset names.
LoadedDataset load_dataset(const DatasetConfig& dataset);

struct ClaimRun {
    ClaimConfig claim;
    std::vector<AuditVerdict> verdicts;
};

struct AuditRun {
    AuditConfig config;
    std::map<std::string, LoadedDataset> datasets;  // only those claims use
    std::vector<ClaimRun> claims;
};

AuditRun run_audit(const AuditConfig& config, const RunOptions& options);

}  // namespace nullaudit
