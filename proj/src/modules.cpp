#include "nullaudit/modules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "nullaudit/error.hpp"
#include "nullaudit/stats.hpp"

namespace nullaudit {

std::string_view to_string(ModuleLabel label) noexcept {
    return label == ModuleLabel::repressed ? "repressed" : "induced";
}

ModuleLabel parse_module_label(std::string_view name) {
    if (name == "repressed") return ModuleLabel::repressed;
    if (name == "induced") return ModuleLabel::induced;
    throw ConfigError("UnknownModule",
                      "module must be repressed or induced, got '" + std::string(name) + "'");
}

std::vector<std::string> ClusterModel::members(std::size_t cluster) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < selected_genes.size(); ++i) {
        if (assignments[i] == cluster) out.push_back(selected_genes[i]);
    }
    return out;
}

std::vector<std::string> top_variance_genes(const FoldChangeMatrix& fc, std::size_t k) {
    if (k > fc.n_genes())
        throw DataError("KTooLarge", "requested " + std::to_string(k) + " genes from " +
                                         std::to_string(fc.n_genes()));
    const auto variances = row_variances(fc);
    std::vector<std::size_t> order(fc.n_genes());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto& ids = fc.gene_ids();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (variances[a] != variances[b]) return variances[a] > variances[b];
        return ids[a] < ids[b];
    });
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(ids[order[i]]);
    return out;
}

DistanceMatrix correlation_distance_matrix(const FoldChangeMatrix& fc,
                                           std::span<const std::string> genes) {
    std::vector<std::size_t> rows;
    for (const auto& g : genes) {
        auto idx = fc.gene_index(g);
        if (!idx) throw DataError("MissingGene", "gene " + g + " is not in the fold-change matrix");
        if (sample_variance(fc.row(*idx)) == 0.0)
            throw StatError("ZeroVariance", "gene " + g + " has constant fold changes");
        rows.push_back(*idx);
    }
    DistanceMatrix d(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j)
            d.set(i, j, 1.0 - pearson_coefficient(fc.row(rows[i]), fc.row(rows[j])));
    }
    return d;
}

std::vector<std::size_t> average_linkage_cluster(const DistanceMatrix& distances, std::size_t k) {
    const std::size_t n = distances.size();
    if (k == 0 || k > n)
        throw DataError("InvalidClusterCount",
                        "cluster count " + std::to_string(k) + " for " + std::to_string(n) + " items");

    // Cluster c lives in slot c, identified by its smallest member index;
    // merging b into a keeps slot a. sum(a, b) is the total pairwise
    // distance, so the UPGMA cost is sum / (|a| |b|).
    std::vector<double> sum(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) sum[i * n + j] = distances.at(i, j);
    }
    std::vector<std::size_t> size(n, 1);
    std::vector<std::size_t> owner(n);  // item -> slot
    std::iota(owner.begin(), owner.end(), std::size_t{0});
    std::vector<bool> active(n, true);

    for (std::size_t remaining = n; remaining > k; --remaining) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_a = n, best_b = n;
        // slot index == smallest member index, so scanning a < b in order
        // visits candidate pairs in lexicographic key order and strict <
        // keeps the first of equal costs.
        for (std::size_t a = 0; a < n; ++a) {
            if (!active[a]) continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (!active[b]) continue;
                const double cost =
                    sum[a * n + b] / (static_cast<double>(size[a]) * static_cast<double>(size[b]));
                if (cost < best) {
                    best = cost;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        for (std::size_t c = 0; c < n; ++c) {
            if (!active[c] || c == best_a || c == best_b) continue;
            const double merged = sum[best_a * n + c] + sum[best_b * n + c];
            sum[best_a * n + c] = merged;
            sum[c * n + best_a] = merged;
        }
        size[best_a] += size[best_b];
        active[best_b] = false;
        for (auto& o : owner) {
            if (o == best_b) o = best_a;
        }
    }

    // Slots are smallest member indices, so ascending slot order is the
    // documented numbering.
    std::vector<std::size_t> label_of_slot(n, 0);
    std::size_t next = 1;
    for (std::size_t s = 0; s < n; ++s) {
        if (active[s]) label_of_slot[s] = next++;
    }
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = label_of_slot[owner[i]];
    return labels;
}

ClusterModel label_modules(const FoldChangeMatrix& fc, std::span<const std::string> genes,
                           std::span<const std::size_t> assignments) {
    if (genes.empty() || genes.size() != assignments.size())
        throw DataError("InvalidAssignments", "assignments must be nonempty and match the genes");
    ClusterModel model;
    model.selected_genes.assign(genes.begin(), genes.end());
    model.assignments.assign(assignments.begin(), assignments.end());
    model.k = *std::max_element(assignments.begin(), assignments.end());

    std::vector<double> sums(model.k, 0.0);
    std::vector<std::size_t> counts(model.k, 0);
    for (std::size_t i = 0; i < genes.size(); ++i) {
        const auto c = assignments[i];
        if (c == 0) throw DataError("InvalidAssignments", "cluster labels are 1-based");
        auto idx = fc.gene_index(genes[i]);
        if (!idx) throw DataError("MissingGene", "gene " + genes[i] + " is not in the fold-change matrix");
        for (double v : fc.row(*idx)) sums[c - 1] += v;
        counts[c - 1] += fc.n_groups();
    }
    model.cluster_means.resize(model.k);
    for (std::size_t c = 0; c < model.k; ++c) {
        if (counts[c] == 0)
            throw DataError("InvalidAssignments", "cluster " + std::to_string(c + 1) + " is empty");
        model.cluster_means[c] = sums[c] / static_cast<double>(counts[c]);
    }
    const auto& m = model.cluster_means;
    const auto lo = std::min_element(m.begin(), m.end()) - m.begin();
    const auto hi = std::max_element(m.begin(), m.end()) - m.begin();
    if (m[lo] == m[hi])
        throw StatError("TieBetweenClusters", "every cluster has the same mean fold change");
    model.repressed = static_cast<std::size_t>(lo) + 1;
    model.induced = static_cast<std::size_t>(hi) + 1;
    return model;
}

std::vector<double> module_response_scores(const FoldChangeMatrix& fc, const ClusterModel& model,
                                           ModuleLabel which) {
    const auto cluster = model.cluster_of(which);
    if (cluster == 0)
        throw DataError("MissingModule", "model has no " + std::string(to_string(which)) + " module");
    std::vector<std::size_t> rows;
    for (const auto& g : model.members(cluster)) {
        auto idx = fc.gene_index(g);
        if (!idx) throw DataError("MissingGene", "gene " + g + " is not in the fold-change matrix");
        rows.push_back(*idx);
    }
    std::vector<double> scores(fc.n_groups());
    for (std::size_t j = 0; j < fc.n_groups(); ++j) {
        double sum = 0.0;
        for (auto r : rows) sum += fc.at(r, j);
        scores[j] = sum / static_cast<double>(rows.size());
    }
    return scores;
}

ClusterModel discover_modules(const FoldChangeMatrix& fc, std::size_t top_k, std::size_t clusters) {
    const auto selected = top_variance_genes(fc, top_k);
    auto ordered = selected;
    std::sort(ordered.begin(), ordered.end());

    const auto distances = correlation_distance_matrix(fc, ordered);
    const auto labels = average_linkage_cluster(distances, clusters);

    std::vector<std::size_t> assignments(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto pos = std::lower_bound(ordered.begin(), ordered.end(), selected[i]) - ordered.begin();
        assignments[i] = labels[static_cast<std::size_t>(pos)];
    }
    return label_modules(fc, selected, assignments);
}

std::string cluster_table(const ClusterModel& model) {
    std::string out = "gene\tcluster\tlabel\n";
    for (std::size_t i = 0; i < model.selected_genes.size(); ++i) {
        const auto c = model.assignments[i];
        out += model.selected_genes[i] + "\t" + std::to_string(c) + "\t";
        if (c == model.repressed) out += "repressed";
        else if (c == model.induced) out += "induced";
        out += "\n";
    }
    return out;
}

}  // namespace nullaudit
