#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nullaudit/expression.hpp"

namespace nullaudit {

/// Dense symmetric distance table.
class DistanceMatrix {
public:
    explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double at(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, double value) {
        d_[i * n_ + j] = value;
        d_[j * n_ + i] = value;
    }

private:
    std::size_t n_;
    std::vector<double> d_;
};

/// The k genes with the largest fold-change variance, by descending variance
/// with ties broken by ascending symbol. Throws DataError("KTooLarge").
std::vector<std::string> top_variance_genes(const FoldChangeMatrix& fc, std::size_t k);

/// d(i, j) = 1 - pearson(row_i, row_j) for the given genes, in that order.
/// Throws StatError("ZeroVariance") naming a constant gene.
DistanceMatrix correlation_distance_matrix(const FoldChangeMatrix& fc,
                                           std::span<const std::string> genes);

/// Agglomerative clustering with unweighted average linkage (UPGMA), cut
/// when `k` clusters remain. Equal merge costs resolve to the pair whose
/// (smaller, larger) minimum member indices is lexicographically smallest.
/// Returns 1-based cluster labels, numbered by each cluster's smallest
/// member index.
std::vector<std::size_t> average_linkage_cluster(const DistanceMatrix& distances, std::size_t k);

enum class ModuleLabel { repressed, induced };

std::string_view to_string(ModuleLabel label) noexcept;
/// Throws ConfigError for anything but "repressed" / "induced".
ModuleLabel parse_module_label(std::string_view name);

struct ClusterModel {
    /// Genes in the order clustering saw them.
    std::vector<std::string> selected_genes;
    /// Cluster label (1..k) per entry of selected_genes.
    std::vector<std::size_t> assignments;
    std::size_t k = 0;
    std::size_t repressed = 0;
    std::size_t induced = 0;
    /// Mean fold change over each cluster's genes and all groups, index k - 1.
    std::vector<double> cluster_means;

    std::size_t cluster_of(ModuleLabel label) const {
        return label == ModuleLabel::repressed ? repressed : induced;
    }
    std::vector<std::string> members(std::size_t cluster) const;
};

/// Repressed = cluster with the lowest mean fold change, induced = highest.
/// Throws StatError("TieBetweenClusters") when the two coincide.
ClusterModel label_modules(const FoldChangeMatrix& fc, std::span<const std::string> genes,
                           std::span<const std::size_t> assignments);

/// Mean fold change of the labeled cluster's genes, per group (aligned with
/// fc.group_ids()).
std::vector<double> module_response_scores(const FoldChangeMatrix& fc, const ClusterModel& model,
                                           ModuleLabel which);

/// Full pipeline: top-variance selection, symbol-sorted ordering, correlation
/// distance, UPGMA cut at `clusters`, labeling.
/// Tab-separated `gene, cluster, label` rows in selected_genes order; the
/// label column is empty for unlabeled clusters.
std::string cluster_table(const ClusterModel& model);

ClusterModel discover_modules(const FoldChangeMatrix& fc, std::size_t top_k, std::size_t clusters);

}  // namespace nullaudit
