#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nullaudit/expression.hpp"
#include "nullaudit/geo.hpp"
#include "nullaudit/modules.hpp"
#include "nullaudit/stats.hpp"

namespace nullaudit {

struct ClinicalSource {
    std::string path;
    ClinicalColumns columns;
};

struct DatasetConfig {
    std::string name;
    std::string accession;
    /// Exactly one of series_matrix / expression is set.
    std::string series_matrix;
    std::string expression;
    std::string platform;
    std::string platform_probe_column;
    std::string platform_symbol_column;
    CollapsePolicy probe_policy = CollapsePolicy::max_mean_probe;
    bool already_log2 = true;
    std::string annotations;
    std::optional<ClinicalSource> clinical;
};

enum class ClaimKind { crossgroup_correlation, regulator_correlation, survival_signature };

std::string_view to_string(ClaimKind kind) noexcept;

struct Candidate {
    std::string gene;
    ModuleLabel module = ModuleLabel::repressed;
};

struct NullSettings {
    std::size_t n_iterations = 10000;
    std::uint64_t seed = 0;
    std::vector<std::string> exclusions;
    /// Also exclude the claim's own genes (score set, candidates or
    /// signature) from the null universe.
    bool exclude_claim_genes = false;
};

enum class PValueMode { plain, smoothed };

struct ClaimConfig {
    std::string id;
    ClaimKind kind = ClaimKind::crossgroup_correlation;
    std::string dataset;
    std::string contrast;
    std::string score_set;     // crossgroup
    std::string response_set;  // crossgroup
    std::vector<Candidate> candidates;  // regulator
    std::size_t top_k = 250;            // regulator
    std::size_t clusters = 3;           // regulator
    std::string signature;              // survival
    CorrelationMethod method = CorrelationMethod::spearman;
    std::vector<std::string> metrics;
    NullSettings null;
    double alpha = 0.05;
    bool allow_missing_genes = false;
    PValueMode p_value = PValueMode::plain;
};

struct AuditSettings {
    std::size_t workers = 1;
    std::size_t max_resamples_per_draw = 100;
};

struct AuditConfig {
    std::map<std::string, DatasetConfig> datasets;
    std::map<std::string, std::vector<std::string>> gene_sets;
    std::map<std::string, ContrastSpec> contrasts;
    std::vector<ClaimConfig> claims;
    AuditSettings settings;
};

/// Validates against the schema; unknown keys, missing references and bad
/// values throw ConfigError naming the offending path. Relative file paths
/// resolve against `base_dir` and are stored absolute.
AuditConfig parse_audit_config(const nlohmann::json& document, const std::filesystem::path& base_dir);
AuditConfig load_audit_config(const std::filesystem::path& path);

/// Canonical form: every default made explicit, so parsing the output
/// reproduces the same config.
nlohmann::json to_json(const AuditConfig& config);
nlohmann::json to_json(const DatasetConfig& dataset);
nlohmann::json to_json(const ClaimConfig& claim);
nlohmann::json to_json(const ContrastSpec& contrast);

/// The sub-config one claim needs: its dataset, gene sets and contrast.
AuditConfig restrict_to_claim(const AuditConfig& config, const ClaimConfig& claim);

}  // namespace nullaudit
