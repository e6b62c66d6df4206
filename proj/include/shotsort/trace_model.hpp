#pragma once
// Detector response, photon-equivalent scaling and Poisson uncertainty bands.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "shotsort/core.hpp"

namespace shotsort {

// Gaussian single-photon response sampled on the trace spacing and truncated
// at +-4 sigma. samples[center()] is the response at zero offset.
struct DetectorKernel {
    double fwhm_ns = 0.0;
    double sigma_ns = 0.0;
    double area = 0.0;
    double dt_ns = 0.0;
    std::vector<double> samples;

    std::size_t half_width() const { return samples.size() / 2; }
    std::size_t center() const { return samples.size() / 2; }
};

inline constexpr double kKernelTruncationSigmas = 4.0;

double fwhm_to_sigma(double fwhm_ns);

DetectorKernel detector_kernel(double fwhm_ns, double dt_ns, double area);

// Divides by the single-photon pulse area and clamps negative samples to 0.
Trace photon_equivalents(const Trace& raw, double single_photon_area);

// Adds one photon pulse arriving at `arrival_ns`. The pulse is evaluated at the
// exact offsets of the sample times and renormalised over the bins that fall
// on the axis, so each stamp integrates to exactly kernel.area.
void add_photon_pulse(const DetectorKernel& kernel, const TimeAxis& axis,
                      double arrival_ns, std::span<double> values);

struct UncertaintyBand {
    Trace mean;
    std::vector<double> sigma;
};

// Per-bin mean over members plus sqrt(sum of counts)/M, reported as a rate.
UncertaintyBand poisson_band(const ShotSet& shots,
                             std::span<const std::size_t> members);

// Draws photon arrival times from a non-negative per-bin density. Bin i covers
// [t_i, t_i + dt); the arrival is uniform within the selected bin.
class ArrivalSampler {
public:
    ArrivalSampler(const TimeAxis& axis, std::span<const double> density);

    double total_weight() const { return total_; }
    double draw(std::mt19937_64& rng) const;

    // Probability mass of each bin (normalised density).
    std::vector<double> bin_probabilities() const;

private:
    TimeAxis axis_;
    std::vector<double> cumulative_;
    double total_ = 0.0;
};

// Noise-free trace of `n_photons` pulses drawn from the sampler.
Trace synthesize_trace(const ArrivalSampler& sampler, const DetectorKernel& kernel,
                       const TimeAxis& axis, std::size_t n_photons,
                       std::mt19937_64& rng);

} // namespace shotsort
