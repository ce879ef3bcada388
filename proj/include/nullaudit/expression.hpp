#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nullaudit {

/// Upper-cases ASCII letters. Gene symbols are matched case-insensitively
/// and stored in this form.
std::string normalize_symbol(std::string_view symbol);

/// Genes x samples table of log2-scale expression values, stored row-major.
///
/// The plain constructor does not enforce the invariants so that malformed
/// input can still be inspected with validate_matrix(); use checked() at
/// ingestion boundaries.
class ExpressionMatrix {
public:
    ExpressionMatrix() = default;
    ExpressionMatrix(std::vector<std::string> gene_ids, std::vector<std::string> sample_ids,
                     std::vector<double> values);

    /// Throws DataError("InvalidMatrix") listing every violation.
    static ExpressionMatrix checked(std::vector<std::string> gene_ids,
                                    std::vector<std::string> sample_ids,
                                    std::vector<double> values);

    std::size_t n_genes() const noexcept { return gene_ids_.size(); }
    std::size_t n_samples() const noexcept { return sample_ids_.size(); }
    const std::vector<std::string>& gene_ids() const noexcept { return gene_ids_; }
    const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
    std::span<const double> values() const noexcept { return values_; }

    double at(std::size_t gene, std::size_t sample) const {
        return values_[gene * sample_ids_.size() + sample];
    }
    std::span<const double> row(std::size_t gene) const {
        return std::span<const double>(values_).subspan(gene * sample_ids_.size(),
                                                        sample_ids_.size());
    }

    /// Case-insensitive lookup.
    std::optional<std::size_t> gene_index(std::string_view symbol) const;
    std::optional<std::size_t> sample_index(std::string_view sample_id) const;

private:
    std::vector<std::string> gene_ids_;
    std::vector<std::string> sample_ids_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> gene_lookup_;
    std::unordered_map<std::string, std::size_t> sample_lookup_;
};

struct Violation {
    std::string kind;  // "duplicate gene id", "duplicate sample id", "non-finite value", "dimension mismatch"
    std::string detail;
};

/// Empty iff the matrix satisfies all of its invariants.
std::vector<Violation> validate_matrix(const ExpressionMatrix& matrix);

struct SampleAnnotation {
    std::string sample_id;
    std::string group_id;
    std::optional<double> dose;       // Gy
    std::optional<double> timepoint;  // hours
    std::map<std::string, std::string> extra;

    /// Value of `group_id` or of an `extra` key; empty when absent.
    std::string field(std::string_view key) const;
};

class GeneSet {
public:
    /// Symbols are normalized; throws DataError("InvalidGeneSet") when empty
    /// or when two symbols coincide after normalization.
    GeneSet(std::string name, const std::vector<std::string>& genes);

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& genes() const noexcept { return genes_; }
    std::size_t size() const noexcept { return genes_.size(); }
    bool contains(std::string_view symbol) const;

private:
    std::string name_;
    std::vector<std::string> genes_;  // input order, normalized
};

/// Equality constraints over an annotation; unset fields match anything.
struct SampleSelector {
    std::optional<double> dose;
    std::optional<double> timepoint;
    std::map<std::string, std::string> extra;

    bool matches(const SampleAnnotation& annotation) const;
};

struct ContrastSpec {
    std::string name;
    SampleSelector treated;
    SampleSelector control;
    std::string pairing_key = "group_id";
    /// Groups to include. Empty means every group with a matching sample.
    std::vector<std::string> groups;
};

struct ContrastPair {
    std::string group_id;
    std::string treated_sample;
    std::string control_sample;
};

/// One treated/control pair per included group, sorted by group id. Throws
/// DataError("AmbiguousContrast") when a selector matches zero or several
/// samples of a group.
std::vector<ContrastPair> resolve_contrast(const std::vector<SampleAnnotation>& annotations,
                                           const ContrastSpec& contrast);

/// Genes x groups table of log2 fold changes (treated - control).
class FoldChangeMatrix {
public:
    FoldChangeMatrix() = default;
    FoldChangeMatrix(std::vector<std::string> gene_ids, std::vector<std::string> group_ids,
                     std::vector<double> values);

    std::size_t n_genes() const noexcept { return gene_ids_.size(); }
    std::size_t n_groups() const noexcept { return group_ids_.size(); }
    const std::vector<std::string>& gene_ids() const noexcept { return gene_ids_; }
    const std::vector<std::string>& group_ids() const noexcept { return group_ids_; }
    std::span<const double> values() const noexcept { return values_; }

    double at(std::size_t gene, std::size_t group) const {
        return values_[gene * group_ids_.size() + group];
    }
    std::span<const double> row(std::size_t gene) const {
        return std::span<const double>(values_).subspan(gene * group_ids_.size(),
                                                        group_ids_.size());
    }
    std::optional<std::size_t> gene_index(std::string_view symbol) const;

private:
    std::vector<std::string> gene_ids_;
    std::vector<std::string> group_ids_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> gene_lookup_;
};

struct ScoreOptions {
    /// Skip set genes absent from the matrix instead of failing. At least
    /// one gene must survive.
    bool allow_missing_genes = false;
};

struct SetScores {
    std::vector<std::string> sample_ids;
    std::vector<double> scores;
    std::vector<std::string> skipped_genes;
};

/// Per-sample arithmetic mean of the set's genes.
SetScores gene_set_score(const ExpressionMatrix& matrix, const GeneSet& set,
                         std::span<const std::string> samples, const ScoreOptions& options = {});

/// Resolves set genes to matrix rows, honoring `allow_missing_genes`.
/// Skipped symbols are appended to `skipped` when non-null.
std::vector<std::size_t> resolve_genes(const ExpressionMatrix& matrix, const GeneSet& set,
                                       const ScoreOptions& options,
                                       std::vector<std::string>* skipped = nullptr);
std::vector<std::size_t> resolve_samples(const ExpressionMatrix& matrix,
                                         std::span<const std::string> samples);

/// Index-level scoring used inside null loops: out[j] = mean over `rows` of
/// matrix(row, columns[j]).
void score_columns(const ExpressionMatrix& matrix, std::span<const std::size_t> rows,
                   std::span<const std::size_t> columns, std::span<double> out);

FoldChangeMatrix fold_changes(const ExpressionMatrix& matrix,
                              const std::vector<SampleAnnotation>& annotations,
                              const ContrastSpec& contrast);

}  // namespace nullaudit
