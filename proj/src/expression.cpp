#include "nullaudit/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "nullaudit/error.hpp"

namespace nullaudit {

std::string normalize_symbol(std::string_view symbol) {
    std::string out(symbol);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

ExpressionMatrix::ExpressionMatrix(std::vector<std::string> gene_ids,
                                   std::vector<std::string> sample_ids,
                                   std::vector<double> values)
    : gene_ids_(std::move(gene_ids)), sample_ids_(std::move(sample_ids)),
      values_(std::move(values)) {
    for (std::size_t i = 0; i < gene_ids_.size(); ++i)
        gene_lookup_.emplace(normalize_symbol(gene_ids_[i]), i);
    for (std::size_t j = 0; j < sample_ids_.size(); ++j)
        sample_lookup_.emplace(sample_ids_[j], j);
}

ExpressionMatrix ExpressionMatrix::checked(std::vector<std::string> gene_ids,
                                           std::vector<std::string> sample_ids,
                                           std::vector<double> values) {
    ExpressionMatrix matrix(std::move(gene_ids), std::move(sample_ids), std::move(values));
    auto violations = validate_matrix(matrix);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << violations.size() << " violation(s)";
        for (std::size_t i = 0; i < violations.size() && i < 5; ++i)
            msg << "; " << violations[i].kind << ": " << violations[i].detail;
        throw DataError("InvalidMatrix", msg.str());
    }
    return matrix;
}

std::optional<std::size_t> ExpressionMatrix::gene_index(std::string_view symbol) const {
    auto it = gene_lookup_.find(normalize_symbol(symbol));
    if (it == gene_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> ExpressionMatrix::sample_index(std::string_view sample_id) const {
    auto it = sample_lookup_.find(std::string(sample_id));
    if (it == sample_lookup_.end()) return std::nullopt;
    return it->second;
}

std::vector<Violation> validate_matrix(const ExpressionMatrix& matrix) {
    std::vector<Violation> out;
    const auto& genes = matrix.gene_ids();
    const auto& samples = matrix.sample_ids();

    std::set<std::string> seen;
    for (const auto& g : genes) {
        if (!seen.insert(normalize_symbol(g)).second)
            out.push_back({"duplicate gene id", g});
    }
    seen.clear();
    for (const auto& s : samples) {
        if (!seen.insert(s).second) out.push_back({"duplicate sample id", s});
    }

    const auto values = matrix.values();
    if (values.size() != genes.size() * samples.size()) {
        std::ostringstream msg;
        msg << values.size() << " values for " << genes.size() << " genes x " << samples.size()
            << " samples";
        out.push_back({"dimension mismatch", msg.str()});
        return out;
    }
    for (std::size_t i = 0; i < genes.size(); ++i) {
        for (std::size_t j = 0; j < samples.size(); ++j) {
            if (!std::isfinite(matrix.at(i, j)))
                out.push_back({"non-finite value", "gene " + genes[i] + ", sample " + samples[j]});
        }
    }
    return out;
}

std::string SampleAnnotation::field(std::string_view key) const {
    if (key == "group_id") return group_id;
    if (key == "sample_id") return sample_id;
    auto it = extra.find(std::string(key));
    return it == extra.end() ? std::string() : it->second;
}

GeneSet::GeneSet(std::string name, const std::vector<std::string>& genes) : name_(std::move(name)) {
    if (genes.empty()) throw DataError("InvalidGeneSet", "gene set '" + name_ + "' is empty");
    std::set<std::string> seen;
    for (const auto& g : genes) {
        auto symbol = normalize_symbol(g);
        if (symbol.empty())
            throw DataError("InvalidGeneSet", "gene set '" + name_ + "' has an empty symbol");
        if (!seen.insert(symbol).second)
            throw DataError("InvalidGeneSet",
                            "gene set '" + name_ + "' lists " + symbol + " more than once");
        genes_.push_back(std::move(symbol));
    }
}

bool GeneSet::contains(std::string_view symbol) const {
    auto key = normalize_symbol(symbol);
    return std::find(genes_.begin(), genes_.end(), key) != genes_.end();
}

namespace {

bool same_number(double a, double b) { return std::abs(a - b) <= 1e-9; }

}  // namespace

bool SampleSelector::matches(const SampleAnnotation& annotation) const {
    if (dose && !(annotation.dose && same_number(*dose, *annotation.dose))) return false;
    if (timepoint && !(annotation.timepoint && same_number(*timepoint, *annotation.timepoint)))
        return false;
    for (const auto& [key, value] : extra) {
        if (annotation.field(key) != value) return false;
    }
    return true;
}

std::vector<ContrastPair> resolve_contrast(const std::vector<SampleAnnotation>& annotations,
                                           const ContrastSpec& contrast) {
    struct Matches {
        std::vector<std::string> treated;
        std::vector<std::string> control;
    };
    std::map<std::string, Matches> by_group;  // sorted by group id
    for (const auto& a : annotations) {
        const auto group = a.field(contrast.pairing_key);
        if (group.empty()) continue;
        const bool t = contrast.treated.matches(a);
        const bool c = contrast.control.matches(a);
        if (!t && !c) continue;
        auto& m = by_group[group];
        if (t) m.treated.push_back(a.sample_id);
        if (c) m.control.push_back(a.sample_id);
    }

    std::vector<std::string> groups;
    if (contrast.groups.empty()) {
        for (const auto& [g, _] : by_group) groups.push_back(g);
    } else {
        groups = contrast.groups;
        std::sort(groups.begin(), groups.end());
        if (std::adjacent_find(groups.begin(), groups.end()) != groups.end())
            throw DataError("AmbiguousContrast",
                            "contrast '" + contrast.name + "' lists a group twice");
    }

    std::vector<ContrastPair> pairs;
    for (const auto& g : groups) {
        auto it = by_group.find(g);
        const std::size_t nt = it == by_group.end() ? 0 : it->second.treated.size();
        const std::size_t nc = it == by_group.end() ? 0 : it->second.control.size();
        if (nt != 1 || nc != 1) {
            std::ostringstream msg;
            msg << "contrast '" << contrast.name << "', group " << g << ": " << nt
                << " treated and " << nc << " control samples (need exactly one each)";
            throw DataError("AmbiguousContrast", msg.str());
        }
        if (it->second.treated.front() == it->second.control.front())
            throw DataError("AmbiguousContrast", "contrast '" + contrast.name + "', group " + g +
                                                     ": treated and control are the same sample");
        pairs.push_back({g, it->second.treated.front(), it->second.control.front()});
    }
    return pairs;
}

FoldChangeMatrix::FoldChangeMatrix(std::vector<std::string> gene_ids,
                                   std::vector<std::string> group_ids, std::vector<double> values)
    : gene_ids_(std::move(gene_ids)), group_ids_(std::move(group_ids)),
      values_(std::move(values)) {
    if (values_.size() != gene_ids_.size() * group_ids_.size())
        throw DataError("InvalidMatrix", "fold-change values do not match dimensions");
    for (std::size_t i = 0; i < gene_ids_.size(); ++i)
        gene_lookup_.emplace(normalize_symbol(gene_ids_[i]), i);
}

std::optional<std::size_t> FoldChangeMatrix::gene_index(std::string_view symbol) const {
    auto it = gene_lookup_.find(normalize_symbol(symbol));
    if (it == gene_lookup_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> resolve_genes(const ExpressionMatrix& matrix, const GeneSet& set,
                                       const ScoreOptions& options,
                                       std::vector<std::string>* skipped) {
    std::vector<std::size_t> rows;
    rows.reserve(set.size());
    for (const auto& g : set.genes()) {
        if (auto idx = matrix.gene_index(g)) {
            rows.push_back(*idx);
        } else if (options.allow_missing_genes) {
            if (skipped) skipped->push_back(g);
        } else {
            throw DataError("MissingGene", "gene " + g + " (set '" + set.name() +
                                               "') is not in the expression matrix");
        }
    }
    if (rows.empty())
        throw DataError("MissingGene",
                        "no gene of set '" + set.name() + "' is in the expression matrix");
    return rows;
}

std::vector<std::size_t> resolve_samples(const ExpressionMatrix& matrix,
                                         std::span<const std::string> samples) {
    std::vector<std::size_t> columns;
    columns.reserve(samples.size());
    for (const auto& s : samples) {
        auto idx = matrix.sample_index(s);
        if (!idx) throw DataError("MissingSample", "sample " + s + " is not in the expression matrix");
        columns.push_back(*idx);
    }
    return columns;
}

void score_columns(const ExpressionMatrix& matrix, std::span<const std::size_t> rows,
                   std::span<const std::size_t> columns, std::span<double> out) {
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        double sum = 0.0;
        for (auto r : rows) sum += matrix.at(r, columns[j]);
        out[j] = sum / n;
    }
}

SetScores gene_set_score(const ExpressionMatrix& matrix, const GeneSet& set,
                         std::span<const std::string> samples, const ScoreOptions& options) {
    SetScores result;
    const auto columns = resolve_samples(matrix, samples);
    const auto rows = resolve_genes(matrix, set, options, &result.skipped_genes);
    result.sample_ids.assign(samples.begin(), samples.end());
    result.scores.resize(columns.size());
    score_columns(matrix, rows, columns, result.scores);
    return result;
}

FoldChangeMatrix fold_changes(const ExpressionMatrix& matrix,
                              const std::vector<SampleAnnotation>& annotations,
                              const ContrastSpec& contrast) {
    const auto pairs = resolve_contrast(annotations, contrast);
    std::vector<std::size_t> treated, control;
    std::vector<std::string> groups;
    for (const auto& p : pairs) {
        std::string id[] = {p.treated_sample, p.control_sample};
        auto cols = resolve_samples(matrix, id);
        treated.push_back(cols[0]);
        control.push_back(cols[1]);
        groups.push_back(p.group_id);
    }
    std::vector<double> values(matrix.n_genes() * groups.size());
    for (std::size_t i = 0; i < matrix.n_genes(); ++i) {
        for (std::size_t j = 0; j < groups.size(); ++j)
            values[i * groups.size() + j] = matrix.at(i, treated[j]) - matrix.at(i, control[j]);
    }
    return FoldChangeMatrix(matrix.gene_ids(), std::move(groups), std::move(values));
}

}  // namespace nullaudit
