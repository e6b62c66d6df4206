#pragma once
// Ground-truth synthetic shots: beat-modulated exponential decays, gamma-Poisson
// photon numbers, Poisson arrivals, Gaussian detector response, baseline noise
// and hard saturation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "shotsort/core.hpp"
#include "shotsort/trace_model.hpp"

namespace shotsort {

struct ClassIntensity {
    double amplitude = 1.0;
    double lifetime_ns = 60.0;
    double beat_period_ns = 18.0;
    double beat_phase_rad = 0.0;
    double beat_contrast = 0.8;
};

// amplitude * exp(-t/tau) * (1 + c cos(2 pi t / T + phi)) / (1 + c), clamped at 0.
double intensity(const ClassIntensity& c, double t_ns);

// Intensity at bin midpoints; the per-bin arrival weight used by sample_shot.
std::vector<double> discretized_intensity(const ClassIntensity& c, const TimeAxis& axis);

struct SimClass {
    ClassIntensity intensity;
    double probability = 0.0;
};

struct SimConfig {
    TimeAxis axis;
    std::vector<SimClass> classes;
    double mean_photons = 30.0;
    double gamma_shape = 1.5;
    double kernel_fwhm_ns = 2.5;
    std::optional<double> saturation_level;  // photon-equivalents per bin
    double baseline_noise_sigma = 0.05;
    std::size_t n_shots = 20000;
    std::uint64_t rng_seed = 1;

    DetectorKernel kernel() const;
    void validate() const;
};

// Two-class desk-scale A/B benchmark: 0-150 ns at 0.5 ns, tau 60 ns, 18 ns
// beats with phases 0 and pi/2, contrast 0.8, 30 mean photons (gamma shape
// 1.5), saturation at 8 per bin, baseline noise 0.05, 20,000 shots.
SimConfig default_scenario();

// Same axis and detector as default_scenario() but a single class.
SimConfig single_class_scenario();

SimConfig sim_config_from_json(const std::string& text);
SimConfig load_sim_config(const std::string& path);
std::string sim_config_to_json(const SimConfig& cfg);

// E ~ Gamma(shape, mean/shape), N ~ Poisson(E).
std::uint64_t draw_photon_count(double mean, double shape, std::mt19937_64& rng);

Trace sample_shot(const ClassIntensity& c, std::size_t n_photons, const SimConfig& cfg,
                  std::mt19937_64& rng);

// Adds baseline noise (sigma in trace units), clips bins whose content
// v * dt exceeds the saturation level and clamps negatives.
void apply_detector_effects(std::span<double> values, const SimConfig& cfg,
                            std::mt19937_64& rng);

struct SimulatedExperiment {
    ShotSet set;                          // labelled
    std::vector<std::uint64_t> photons;   // true photon number per shot
};

SimulatedExperiment generate_experiment(const SimConfig& cfg);

// Normalised per-class arrival densities smoothed by the detector kernel,
// scaled by the mean photon number: the expected noise-free trace per class.
std::vector<Trace> expected_class_traces(const SimConfig& cfg);

} // namespace shotsort
