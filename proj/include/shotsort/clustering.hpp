#pragma once
// Complete-linkage agglomerative clustering and model-based silhouette scores.

#include <cstddef>
#include <span>
#include <vector>

#include "shotsort/core.hpp"
#include "shotsort/poisson_distance.hpp"

namespace shotsort {

// Cluster ids are dense in [0, k); ids are ordered by each cluster's first
// member position.
struct Partition {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;

    std::vector<std::vector<std::size_t>> clusters() const;
    std::vector<std::size_t> sizes() const;
    bool operator==(const Partition&) const = default;
};

// One agglomeration step. Clusters are named by their smallest original
// index; merging `keep` < `absorbed` leaves the merged cluster named `keep`.
struct MergeStep {
    std::size_t keep = 0;
    std::size_t absorbed = 0;
    double distance = 0.0;
    bool operator==(const MergeStep&) const = default;
};

// Complete-linkage merges from singletons down to k_target clusters. At each
// step the pair with minimal linkage wins; ties go to the smallest first id,
// then the smallest second id.
std::vector<MergeStep> merge_sequence(const DistanceMatrix& dm, std::size_t k_target = 1);

// Applies the first n - k merges of `merges` to n singletons.
Partition partition_from_merges(std::size_t n, std::span<const MergeStep> merges,
                                std::size_t k);

Partition agglomerate(const DistanceMatrix& dm, std::size_t k_target);

// Per-bin mean over members on the full axis.
Trace cluster_model(const ShotSet& set, std::span<const std::size_t> members);

struct SilhouetteReport {
    std::vector<double> per_member;
    std::vector<double> per_cluster_mean;
    double quality = 0.0;
};

// Silhouette of `members` (set indices) under `partition` (indexed like
// members). Own-cluster distance uses the cluster mean with the shot left out;
// other-cluster distance is the minimum over the other clusters' means.
SilhouetteReport silhouette(const ShotSet& set, std::span<const std::size_t> members,
                            const Partition& partition, const Roi& roi,
                            double model_floor = kDefaultModelFloor,
                            bool normalize = false);

// Score of one member from its own/other distances. Returns 0 when both are 0.
double silhouette_value(double d_own, double d_other);

struct ClusterCountSelection {
    std::size_t k_best = 0;
    std::vector<double> quality;  // quality[k - 2] for k = 2..k_max
    std::vector<Partition> partitions;
};

ClusterCountSelection select_num_clusters(const ShotSet& set,
                                          std::span<const std::size_t> members,
                                          const Roi& roi, std::size_t k_max,
                                          double model_floor = kDefaultModelFloor,
                                          bool normalize = false);

} // namespace shotsort
