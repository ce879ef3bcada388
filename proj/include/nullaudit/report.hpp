#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nullaudit/audit.hpp"

namespace nullaudit {

inline constexpr std::string_view kReportFormat = "nullaudit-report/1";
/// Reproducible-build convention: when set, its value (seconds since the
/// epoch) replaces the wall clock in report timestamps.
inline constexpr const char* kTimestampEnv = "SOURCE_DATE_EPOCH";

/// Structured report of one verdict. Contains the restricted config needed
/// to re-run it, so it is self-sufficient for replay.
nlohmann::json verdict_report(const AuditRun& run, const ClaimRun& claim, const AuditVerdict& verdict,
                              const std::string& generated_at);

/// Single-column (one column per statistic) CSV; header cells read
/// `<statistic>[seed=<u64> n_iterations=<n>]`.
std::string null_samples_csv(const std::vector<NullDistribution>& nulls);

/// Scatter of the observed data beside a histogram of each null with the
/// observed value marked. Drawn only from fields of the structured report.
std::string render_figure_svg(const nlohmann::json& report);

/// Plain-text summary of a top-level audit report.
std::string render_summary(const nlohmann::json& audit_report);

/// Current UTC time (or SOURCE_DATE_EPOCH) as ISO-8601.
std::string report_timestamp();

struct EmittedReport {
    nlohmann::json audit_report;
    std::vector<std::filesystem::path> claim_dirs;
};

/// Writes `<out>/audit_report.json`, `<out>/summary.txt` and, per verdict,
/// `<out>/<claim_id>/{report.json, null_samples.csv, figure.svg}`. Throws
/// IoError("OutputIOError").
EmittedReport emit_report(const AuditRun& run, const std::filesystem::path& out_dir);

struct ReplayResult {
    bool matches = false;
    std::string claim_id;
    /// First divergence, empty when everything matched.
    std::string divergence;
};

/// Re-runs the config embedded in a verdict report, writes the fresh outputs
/// under `out_dir`, and compares observed statistics and null samples
/// bit-for-bit.
ReplayResult replay_report(const std::filesystem::path& report_path, const std::filesystem::path& out_dir,
                           std::size_t workers);

}  // namespace nullaudit
