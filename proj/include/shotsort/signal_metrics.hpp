#pragma once
// Signal content (area under ln(1 + trace)), highest-content ranking and the
// photon-number calibration of content values.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shotsort/core.hpp"
#include "shotsort/trace_model.hpp"

namespace shotsort {

// Prompt artefacts occupy the first few ns after excitation.
inline constexpr double kMinRankingStartNs = 3.0;

double signal_content(std::span<const double> values, const TimeAxis& axis, BinRange bins);
double signal_content(const Trace& shot, const Roi& window);

// [3 ns, axis end), clipped to the axis start.
Roi default_ranking_window(const TimeAxis& axis);

struct ContentRanking {
    std::vector<double> content;
    std::vector<std::size_t> order;  // descending content, ties by index
    Roi window;

    std::vector<std::size_t> top(std::size_t n) const;
};

// Windows starting before 3 ns are rejected unless allow_early_start is set.
ContentRanking rank_shots(const ShotSet& set, const Roi& window,
                          bool allow_early_start = false);

struct PhotonCalibration {
    struct Entry {
        int n_photons = 0;
        double content_mean = 0.0;
        double content_std = 0.0;
    };
    std::vector<Entry> entries;
    Roi tail_window;
    Roi full_window;
};

PhotonCalibration calibrate_photon_number(const Trace& average, const DetectorKernel& kernel,
                                          std::span<const int> n_values, std::size_t n_sims,
                                          const Roi& tail, const Roi& full,
                                          std::uint64_t rng_seed);

struct PhotonEstimate {
    double n_est = 0.0;
    double n_sigma = 0.0;
};

// Piecewise-linear inverse of content_mean(N). Throws OutOfRange outside the
// calibrated span.
PhotonEstimate estimate_photons(double content_full, const PhotonCalibration& cal);

void write_calibration_csv(const PhotonCalibration& cal, const std::string& path);

} // namespace shotsort
