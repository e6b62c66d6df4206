#pragma once
// Unblinded scoring of a class assignment against simulator labels. Nothing
// in the analysis path calls into this header.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shotsort/core.hpp"

namespace shotsort {

struct PhotonBinAccuracy {
    double lo = 0.0;   // [lo, hi) in photons
    double hi = 0.0;
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;   // NaN when the bin is empty
};

struct LabelEvaluation {
    std::size_t n_shots = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    // mapping[c]: label matched to assigned class c (n_labels when unmatched).
    std::vector<std::size_t> mapping;
    std::vector<std::vector<std::size_t>> confusion;   // [class][label]
    std::vector<PhotonBinAccuracy> photon_bins;
};

// Default photon bin edges: 0, 10, 20, 30, 50, 75, 100, 150, 200, infinity.
std::vector<double> default_photon_edges();

// Per-shot photon estimate used for binning: integrated photon-equivalents.
std::vector<double> integrated_photons(const ShotSet& set);

// Best-permutation accuracy of `assignment` against the set's labels,
// binned by `photons` (one value per shot) over `edges`.
LabelEvaluation evaluate_against_labels(const ShotSet& set,
                                        std::span<const std::size_t> assignment,
                                        std::span<const double> photons,
                                        std::span<const double> edges);

// Same, binned by integrated_photons(set) over default_photon_edges().
LabelEvaluation evaluate_against_labels(const ShotSet& set,
                                        std::span<const std::size_t> assignment);

// Accuracy over the shots with photons >= threshold, using the overall best mapping.
double accuracy_above(const LabelEvaluation& eval, std::span<const std::size_t> assignment,
                      std::span<const std::uint8_t> labels, std::span<const double> photons,
                      double threshold);

} // namespace shotsort
