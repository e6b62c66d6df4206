#pragma once
// Shared silhouette scoring used by silhouette() and the ROI scan.

#include <span>

#include "shotsort/clustering.hpp"

namespace shotsort::detail {

// d_own[i]: distance of member i to its leave-one-out own-cluster mean
// (ignored for singletons). d_model[i * k + c]: distance to cluster c's mean.
SilhouetteReport score_silhouette(const Partition& partition, std::span<const double> d_own,
                                  std::span<const double> d_model, bool normalize);

void check_silhouette_partition(const Partition& partition, std::size_t n_members);

} // namespace shotsort::detail
