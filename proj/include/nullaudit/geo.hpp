#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "nullaudit/expression.hpp"

namespace nullaudit {

/// One `!Series_*` or `!Sample_*` line, quotes stripped. Keys keep their
/// prefix-free name (`title`, `characteristics_ch1`, ...) and may repeat.
struct MetadataLine {
    std::string key;
    std::vector<std::string> values;

    bool operator==(const MetadataLine&) const = default;
};

/// Parsed GEO series-matrix file. Missing cells in the data table are NaN.
struct SeriesMatrixDocument {
    std::vector<MetadataLine> series_metadata;
    std::vector<MetadataLine> sample_metadata;
    std::vector<std::string> probe_ids;
    std::vector<std::string> sample_ids;
    std::vector<double> values;  // probes x samples, row-major

    double at(std::size_t probe, std::size_t sample) const {
        return values[probe * sample_ids.size() + sample];
    }
    /// All values of the first line with this key, or empty.
    std::vector<std::string> series_values(std::string_view key) const;
    /// Every `!Sample_<key>` line, in file order.
    std::vector<const MetadataLine*> sample_lines(std::string_view key) const;
};

/// Equality that treats two missing cells as equal.
bool same_document(const SeriesMatrixDocument& a, const SeriesMatrixDocument& b);

/// Errors (DataError): MalformedLine, MissingTableDelimiters, RaggedRow,
/// DuplicateProbe. Messages carry 1-based line numbers.
SeriesMatrixDocument parse_series_matrix(std::istream& in);
void write_series_matrix(std::ostream& out, const SeriesMatrixDocument& doc);

/// probe id -> gene symbol (normalized; empty means unannotated).
struct PlatformAnnotation {
    std::map<std::string, std::string> symbol_of_probe;
};

/// Two or more delimited columns with a header; `#` lines are skipped. When
/// the column names are empty the first two columns are used.
PlatformAnnotation parse_platform_annotation(std::istream& in, std::string_view probe_column = {},
                                             std::string_view symbol_column = {});

enum class CollapsePolicy { max_mean_probe, mean_of_probes };

std::string_view to_string(CollapsePolicy policy) noexcept;
CollapsePolicy parse_collapse_policy(std::string_view name);

struct CollapseReport {
    std::size_t probes_total = 0;
    std::size_t probes_unannotated = 0;
    std::size_t probes_ambiguous = 0;  // symbol lists several genes ("A /// B")
    std::size_t genes_with_missing = 0;
    std::vector<std::string> dropped_genes;
};

struct CollapseOptions {
    CollapsePolicy policy = CollapsePolicy::max_mean_probe;
    /// When false, values are raw intensities and log2(x + 1) is applied
    /// before collapsing.
    bool already_log2 = true;
};

/// One row per annotated gene symbol, symbols sorted ascending. Without an
/// annotation (nullptr), probe ids are taken as gene symbols.
ExpressionMatrix collapse_probes(const SeriesMatrixDocument& doc, const PlatformAnnotation* annotation,
                                 const CollapseOptions& options, CollapseReport* report = nullptr);

struct ClinicalRow {
    std::string subject_id;
    double time = 0.0;
    int event = 0;
    std::map<std::string, std::string> covariates;
};

struct ClinicalTable {
    std::vector<ClinicalRow> rows;
    std::size_t dropped_incomplete = 0;
};

struct ClinicalColumns {
    std::string subject;
    std::string time;
    std::string event;
    /// Optional recoding of event cells, e.g. {"Yes": 1, "No": 0}. Cells not
    /// in the map must read as 0 or 1.
    std::map<std::string, int> event_map;
    /// 0 = sniff from the header.
    char delimiter = 0;
};

/// Rows with a missing time or event are dropped and counted. Errors
/// (DataError): MissingColumn, NonPositiveTime, BadEventFlag,
/// DuplicateSubject, RaggedRow.
ClinicalTable parse_clinical_table(std::istream& in, const ClinicalColumns& columns);

/// Two-column gene-level table: header `gene<TAB>sample...`, one row per gene.
ExpressionMatrix parse_expression_table(std::istream& in);
void write_expression_table(std::ostream& out, const ExpressionMatrix& matrix);

/// Tab-separated annotations with header columns sample_id, group_id and
/// optional dose, time; any further column becomes an `extra` entry.
std::vector<SampleAnnotation> parse_sample_annotations(std::istream& in);

/// Flattened sample metadata: sample_id, title, source_name and one column
/// per `key: value` characteristic. A starting point for annotation files.
void write_sample_sheet(std::ostream& out, const SeriesMatrixDocument& doc);

/// Base of the GEO series tree, overridable through NULLAUDIT_GEO_BASE_URL.
inline constexpr std::string_view kGeoBaseUrl = "https://ftp.ncbi.nlm.nih.gov/geo/series";
inline constexpr const char* kGeoBaseUrlEnv = "NULLAUDIT_GEO_BASE_URL";

/// Path below the base URL, e.g. /GSE30nnn/GSE30240/matrix/GSE30240_series_matrix.txt.gz.
/// Throws ConfigError("InvalidAccession") unless `accession` is GSE<digits>.
std::string series_matrix_path(std::string_view accession);

/// Downloads the series-matrix archive into `destination` (a directory) and
/// returns the file path. A nonempty existing file is reused without any
/// network access. Errors (IoError): NetworkError, NotFound.
std::string fetch_series_matrix(std::string_view accession, const std::string& destination);

}  // namespace nullaudit
