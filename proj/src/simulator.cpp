#include "shotsort/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "shotsort/error.hpp"
#include "shotsort/parallel.hpp"
#include "shotsort/random.hpp"

namespace shotsort {

double intensity(const ClassIntensity& c, double t_ns) {
    const double beat = 1.0 + c.beat_contrast *
                                  std::cos(2.0 * std::numbers::pi * t_ns / c.beat_period_ns +
                                           c.beat_phase_rad);
    const double v = c.amplitude * std::exp(-t_ns / c.lifetime_ns) * beat / (1.0 + c.beat_contrast);
    return std::max(v, 0.0);
}

std::vector<double> discretized_intensity(const ClassIntensity& c, const TimeAxis& axis) {
    std::vector<double> w(axis.n_samples);
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = intensity(c, std::max(0.0, axis.time(i) + 0.5 * axis.dt_ns));
    return w;
}

DetectorKernel SimConfig::kernel() const { return detector_kernel(kernel_fwhm_ns, axis.dt_ns, 1.0); }

void SimConfig::validate() const {
    axis.validate();
    if (classes.empty()) throw InvalidParameter("sim config: at least one class required");
    if (classes.size() > 255) throw InvalidParameter("sim config: at most 255 classes");
    double total = 0.0;
    for (const auto& c : classes) {
        if (!(c.intensity.lifetime_ns > 0.0) || !(c.intensity.beat_period_ns > 0.0))
            throw InvalidParameter("sim config: lifetime and beat period must be positive");
        if (c.intensity.beat_contrast < 0.0 || c.intensity.beat_contrast > 1.0)
            throw InvalidParameter("sim config: beat contrast must lie in [0, 1]");
        if (c.probability < 0.0) throw InvalidParameter("sim config: negative class probability");
        total += c.probability;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw InvalidParameter("sim config: class probabilities must sum to 1");
    if (!(mean_photons > 0.0)) throw InvalidParameter("sim config: mean_photons must be positive");
    if (!(gamma_shape > 0.0)) throw InvalidParameter("sim config: gamma_shape must be positive");
    if (!(kernel_fwhm_ns > 0.0)) throw InvalidParameter("sim config: kernel fwhm must be positive");
    if (saturation_level && !(*saturation_level > 0.0))
        throw InvalidParameter("sim config: saturation level must be positive");
    if (baseline_noise_sigma < 0.0) throw InvalidParameter("sim config: negative noise sigma");
    if (n_shots == 0) throw InvalidParameter("sim config: n_shots must be positive");
}

SimConfig default_scenario() {
    SimConfig cfg;
    cfg.axis = TimeAxis::make(0.0, 0.5, 300);
    ClassIntensity a;
    a.amplitude = 1.0;
    a.lifetime_ns = 60.0;
    a.beat_period_ns = 18.0;
    a.beat_phase_rad = 0.0;
    a.beat_contrast = 0.8;
    ClassIntensity b = a;
    b.beat_phase_rad = std::numbers::pi / 2.0;
    cfg.classes = {SimClass{a, 0.5}, SimClass{b, 0.5}};
    cfg.mean_photons = 30.0;
    cfg.gamma_shape = 1.5;
    cfg.kernel_fwhm_ns = 2.5;
    cfg.saturation_level = 8.0;
    cfg.baseline_noise_sigma = 0.05;
    cfg.n_shots = 20000;
    cfg.rng_seed = 1;
    return cfg;
}

SimConfig single_class_scenario() {
    SimConfig cfg = default_scenario();
    cfg.classes.resize(1);
    cfg.classes[0].probability = 1.0;
    return cfg;
}

namespace {

using nlohmann::json;

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

} // namespace

SimConfig sim_config_from_json(const std::string& text) {
    SimConfig cfg = default_scenario();
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw InvalidParameter("sim config: top level must be an object");
        if (j.contains("axis")) {
            const json& a = j.at("axis");
            read_opt(a, "t0_ns", cfg.axis.t0_ns);
            read_opt(a, "dt_ns", cfg.axis.dt_ns);
            read_opt(a, "n_samples", cfg.axis.n_samples);
        }
        if (j.contains("classes")) {
            cfg.classes.clear();
            for (const json& c : j.at("classes")) {
                SimClass sc;
                read_opt(c, "amplitude", sc.intensity.amplitude);
                read_opt(c, "lifetime_ns", sc.intensity.lifetime_ns);
                read_opt(c, "beat_period_ns", sc.intensity.beat_period_ns);
                read_opt(c, "beat_phase_rad", sc.intensity.beat_phase_rad);
                read_opt(c, "beat_contrast", sc.intensity.beat_contrast);
                read_opt(c, "probability", sc.probability);
                cfg.classes.push_back(sc);
            }
        }
        read_opt(j, "mean_photons", cfg.mean_photons);
        read_opt(j, "gamma_shape", cfg.gamma_shape);
        read_opt(j, "kernel_fwhm_ns", cfg.kernel_fwhm_ns);
        if (j.contains("saturation_level")) {
            if (j.at("saturation_level").is_null())
                cfg.saturation_level.reset();
            else
                cfg.saturation_level = j.at("saturation_level").get<double>();
        }
        read_opt(j, "baseline_noise_sigma", cfg.baseline_noise_sigma);
        read_opt(j, "n_shots", cfg.n_shots);
        read_opt(j, "rng_seed", cfg.rng_seed);
    } catch (const json::exception& e) {
        throw InvalidParameter(std::string("sim config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open simulation config");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return sim_config_from_json(ss.str());
    } catch (const InvalidParameter& e) {
        throw FormatError(path, e.what());
    }
}

std::string sim_config_to_json(const SimConfig& cfg) {
    nlohmann::ordered_json j;
    j["axis"] = {{"t0_ns", cfg.axis.t0_ns}, {"dt_ns", cfg.axis.dt_ns},
                 {"n_samples", cfg.axis.n_samples}};
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : cfg.classes) {
        j["classes"].push_back({{"amplitude", c.intensity.amplitude},
                                {"lifetime_ns", c.intensity.lifetime_ns},
                                {"beat_period_ns", c.intensity.beat_period_ns},
                                {"beat_phase_rad", c.intensity.beat_phase_rad},
                                {"beat_contrast", c.intensity.beat_contrast},
                                {"probability", c.probability}});
    }
    j["mean_photons"] = cfg.mean_photons;
    j["gamma_shape"] = cfg.gamma_shape;
    j["kernel_fwhm_ns"] = cfg.kernel_fwhm_ns;
    if (cfg.saturation_level)
        j["saturation_level"] = *cfg.saturation_level;
    else
        j["saturation_level"] = nullptr;
    j["baseline_noise_sigma"] = cfg.baseline_noise_sigma;
    j["n_shots"] = cfg.n_shots;
    j["rng_seed"] = cfg.rng_seed;
    return j.dump(2);
}

std::uint64_t draw_photon_count(double mean, double shape, std::mt19937_64& rng) {
    if (!(mean > 0.0) || !(shape > 0.0))
        throw InvalidParameter("draw_photon_count: mean and shape must be positive");
    std::gamma_distribution<double> energy(shape, mean / shape);
    const double e = energy(rng);
    if (!(e > 0.0)) return 0;
    std::poisson_distribution<std::uint64_t> count(e);
    return count(rng);
}

void apply_detector_effects(std::span<double> values, const SimConfig& cfg,
                            std::mt19937_64& rng) {
    if (cfg.baseline_noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.baseline_noise_sigma);
        for (double& v : values) v += noise(rng);
    }
    // The level counts photon-equivalents per bin; samples are rates per ns.
    const double cap = cfg.saturation_level ? *cfg.saturation_level / cfg.axis.dt_ns
                                            : std::numeric_limits<double>::infinity();
    for (double& v : values) v = std::clamp(v, 0.0, cap);
}

namespace {

Trace sample_with(const ArrivalSampler& sampler, const DetectorKernel& kernel,
                  std::size_t n_photons, const SimConfig& cfg, std::mt19937_64& rng) {
    Trace t = n_photons > 0 ? synthesize_trace(sampler, kernel, cfg.axis, n_photons, rng)
                            : Trace::zeros(cfg.axis);
    apply_detector_effects(t.mutable_values(), cfg, rng);
    return t;
}

} // namespace

Trace sample_shot(const ClassIntensity& c, std::size_t n_photons, const SimConfig& cfg,
                  std::mt19937_64& rng) {
    const auto density = discretized_intensity(c, cfg.axis);
    const ArrivalSampler sampler(cfg.axis, density);
    return sample_with(sampler, cfg.kernel(), n_photons, cfg, rng);
}

SimulatedExperiment generate_experiment(const SimConfig& cfg) {
    cfg.validate();
    const DetectorKernel kernel = cfg.kernel();
    std::vector<ArrivalSampler> samplers;
    samplers.reserve(cfg.classes.size());
    for (const auto& c : cfg.classes)
        samplers.emplace_back(cfg.axis, discretized_intensity(c.intensity, cfg.axis));

    const std::size_t len = cfg.axis.n_samples;
    std::vector<double> data(cfg.n_shots * len);
    std::vector<std::uint8_t> labels(cfg.n_shots);
    std::vector<std::uint64_t> photons(cfg.n_shots);

    parallel::for_each_index(
        cfg.n_shots,
        [&](std::size_t s) {
            auto rng = derived_engine(cfg.rng_seed, stream::kShot, s);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double pick = u(rng);
            std::size_t cls = cfg.classes.size() - 1;
            double acc = 0.0;
            for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
                acc += cfg.classes[c].probability;
                if (pick < acc && cfg.classes[c].probability > 0.0) {
                    cls = c;
                    break;
                }
            }
            while (cfg.classes[cls].probability <= 0.0 && cls > 0) --cls;
            const std::uint64_t n = draw_photon_count(cfg.mean_photons, cfg.gamma_shape, rng);
            const Trace t = sample_with(samplers[cls], kernel, n, cfg, rng);
            std::copy(t.values().begin(), t.values().end(), data.begin() + static_cast<long>(s * len));
            labels[s] = static_cast<std::uint8_t>(cls);
            photons[s] = n;
        },
        64);

    SimulatedExperiment out{ShotSet(cfg.axis, cfg.n_shots, std::move(data)), std::move(photons)};
    out.set.set_labels(std::move(labels));
    out.set.meta()["source"] = "simulator";
    out.set.meta()["single_photon_area"] = "1";
    out.set.meta()["rng_seed"] = std::to_string(cfg.rng_seed);
    out.set.meta()["n_classes"] = std::to_string(cfg.classes.size());
    out.set.meta()["kernel_fwhm_ns"] = std::to_string(cfg.kernel_fwhm_ns);
    return out;
}

std::vector<Trace> expected_class_traces(const SimConfig& cfg) {
    const DetectorKernel kernel = cfg.kernel();
    constexpr int kSubsamples = 16;
    std::vector<Trace> out;
    for (const auto& c : cfg.classes) {
        const ArrivalSampler sampler(cfg.axis, discretized_intensity(c.intensity, cfg.axis));
        const auto prob = sampler.bin_probabilities();
        std::vector<double> acc(cfg.axis.n_samples, 0.0);
        std::vector<double> stamp(cfg.axis.n_samples);
        for (std::size_t j = 0; j < prob.size(); ++j) {
            if (prob[j] == 0.0) continue;
            std::fill(stamp.begin(), stamp.end(), 0.0);
            for (int q = 0; q < kSubsamples; ++q) {
                const double t = cfg.axis.time(j) + (q + 0.5) / kSubsamples * cfg.axis.dt_ns;
                add_photon_pulse(kernel, cfg.axis, t, stamp);
            }
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += cfg.mean_photons * prob[j] * stamp[i] / kSubsamples;
        }
        out.emplace_back(cfg.axis, std::move(acc));
    }
    return out;
}

} // namespace shotsort
