#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "shotsort/error.hpp"
#include "shotsort/parallel.hpp"
#include "shotsort/signal_metrics.hpp"
#include "shotsort/simulator.hpp"

using namespace shotsort;

TEST_CASE("intensity examples") {
    ClassIntensity c;
    c.amplitude = 1.0;
    c.lifetime_ns = 60.0;
    c.beat_period_ns = 18.0;
    c.beat_contrast = 0.8;
    c.beat_phase_rad = 0.0;
    CHECK(intensity(c, 0.0) == doctest::Approx(1.0));
    CHECK(intensity(c, 9.0) == doctest::Approx(std::exp(-9.0 / 60.0) * 0.2 / 1.8));
    CHECK(intensity(c, 18.0) == doctest::Approx(std::exp(-18.0 / 60.0)));
    c.beat_phase_rad = std::numbers::pi / 2.0;
    CHECK(intensity(c, 0.0) == doctest::Approx(1.0 / 1.8));
    c.beat_contrast = 1.0;
    c.beat_phase_rad = 0.0;
    CHECK(intensity(c, 9.0) >= 0.0);
}

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments photon_moments(double mean, double shape, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(draw_photon_count(mean, shape, rng));
        s += x;
        ss += x * x;
    }
    const double m = s / static_cast<double>(n);
    return {m, (ss - s * m) / static_cast<double>(n - 1)};
}

} // namespace

TEST_CASE("gamma-Poisson photon numbers") {
    const std::size_t n = 200000;
    SUBCASE("desk-scale shape") {
        const auto m = photon_moments(30.0, 1.5, n, 1);
        const double var = 30.0 + 30.0 * 30.0 / 1.5;
        CHECK(std::abs(m.mean - 30.0) < 3.0 * std::sqrt(var / n));
        CHECK(m.var == doctest::Approx(var).epsilon(0.05));
    }
    SUBCASE("large shape is nearly Poisson") {
        const auto m = photon_moments(30.0, 1e4, n, 2);
        CHECK(std::abs(m.mean - 30.0) < 3.0 * std::sqrt(30.0 / n));
        CHECK(m.var == doctest::Approx(30.0).epsilon(0.05));
    }
    SUBCASE("shape one") {
        const auto m = photon_moments(20.0, 1.0, n, 3);
        CHECK(m.var == doctest::Approx(20.0 + 400.0).epsilon(0.10));
    }
    std::mt19937_64 rng(4);
    CHECK_THROWS_AS(draw_photon_count(0.0, 1.0, rng), InvalidParameter);
    CHECK_THROWS_AS(draw_photon_count(1.0, 0.0, rng), InvalidParameter);
}

namespace {

SimConfig clean_config() {
    SimConfig cfg = default_scenario();
    cfg.axis = TimeAxis::make(0.0, 0.5, 80);  // 0-40 ns
    cfg.saturation_level.reset();
    cfg.baseline_noise_sigma = 0.0;
    return cfg;
}

} // namespace

TEST_CASE("photon-free and single-photon shots") {
    const SimConfig cfg = clean_config();
    std::mt19937_64 rng(5);
    const Trace zero = sample_shot(cfg.classes[0].intensity, 0, cfg, rng);
    for (double v : zero.values()) CHECK(v == 0.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Trace one = sample_shot(cfg.classes[0].intensity, 1, cfg, rng);
        // Pulses are normalised over the samples they reach, edges included.
        CHECK(one.integral() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("mean shot matches a quadrature of the arrival model") {
    const SimConfig cfg = clean_config();
    const ClassIntensity& cls = cfg.classes[1].intensity;
    const std::size_t n_shots = 10000, n_photons = 100;
    const std::size_t bins = cfg.axis.n_samples;
    const double dt = cfg.axis.dt_ns;
    const double sigma = cfg.kernel_fwhm_ns / (2.0 * std::sqrt(2.0 * std::log(2.0)));

    std::vector<double> sum(bins, 0.0), sumsq(bins, 0.0);
    std::mt19937_64 rng(6);
    for (std::size_t s = 0; s < n_shots; ++s) {
        const Trace t = sample_shot(cls, n_photons, cfg, rng);
        for (std::size_t i = 0; i < bins; ++i) {
            sum[i] += t[i];
            sumsq[i] += t[i] * t[i];
        }
    }

    // Oracle: arrival bin j with probability proportional to the intensity at
    // its midpoint, uniform within the bin; each photon deposits a Gaussian
    // sampled at bin times and normalised to unit area on the axis.
    std::vector<double> weight(bins);
    double wsum = 0.0;
    for (std::size_t j = 0; j < bins; ++j) {
        const double t = (static_cast<double>(j) + 0.5) * dt;
        weight[j] = std::exp(-t / cls.lifetime_ns) *
                    (1.0 + cls.beat_contrast *
                               std::cos(2.0 * std::numbers::pi * t / cls.beat_period_ns +
                                        cls.beat_phase_rad));
        wsum += weight[j];
    }
    const int q = 64;
    std::vector<double> oracle(bins, 0.0), g(bins);
    for (std::size_t j = 0; j < bins; ++j)
        for (int u = 0; u < q; ++u) {
            const double a = (static_cast<double>(j) + (u + 0.5) / q) * dt;
            double norm = 0.0;
            for (std::size_t i = 0; i < bins; ++i) {
                const double d = static_cast<double>(i) * dt - a;
                g[i] = std::abs(d) <= 4.0 * sigma ? std::exp(-d * d / (2 * sigma * sigma)) : 0.0;
                norm += g[i] * dt;
            }
            for (std::size_t i = 0; i < bins; ++i)
                oracle[i] += n_photons * weight[j] / wsum / q * g[i] / norm;
        }

    int exceed = 0;
    for (std::size_t i = 0; i < bins; ++i) {
        const double mean = sum[i] / n_shots;
        const double sd = std::sqrt(std::max(sumsq[i] / n_shots - mean * mean, 0.0) / n_shots);
        if (std::abs(mean - oracle[i]) > 3.0 * sd + 1e-9) ++exceed;
    }
    CHECK(exceed <= 3);
}

TEST_CASE("experiment labels, photons and determinism") {
    SimConfig cfg = default_scenario();
    cfg.n_shots = 4000;
    cfg.classes[0].probability = 0.3;
    cfg.classes[1].probability = 0.7;
    cfg.rng_seed = 17;

    parallel::set_max_threads(1);
    const auto a = generate_experiment(cfg);
    parallel::set_max_threads(4);
    const auto b = generate_experiment(cfg);
    parallel::set_max_threads(0);

    CHECK(std::equal(a.set.data().begin(), a.set.data().end(), b.set.data().begin()));
    CHECK(*a.set.labels() == *b.set.labels());
    CHECK(a.photons == b.photons);

    const auto& labels = *a.set.labels();
    const double frac = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / 4000.0;
    CHECK(std::abs(frac - 0.7) < 3.0 * std::sqrt(0.21 / 4000.0));
    CHECK(a.set.meta().at("rng_seed") == "17");
    for (double v : a.set.data()) {
        CHECK(v >= 0.0);
        CHECK(v * cfg.axis.dt_ns <= 8.0);
    }

    cfg.rng_seed = 18;
    const auto c = generate_experiment(cfg);
    CHECK(!std::equal(a.set.data().begin(), a.set.data().end(), c.set.data().begin()));
}

TEST_CASE("config JSON") {
    const SimConfig cfg = default_scenario();
    const std::string text = sim_config_to_json(cfg);
    const SimConfig back = sim_config_from_json(text);
    CHECK(sim_config_to_json(back) == text);
    CHECK(back.classes.size() == 2);
    CHECK(back.saturation_level.has_value());

    const SimConfig partial = sim_config_from_json(R"({"n_shots": 50, "saturation_level": null})");
    CHECK(partial.n_shots == 50);
    CHECK(!partial.saturation_level.has_value());
    CHECK(partial.mean_photons == 30.0);

    CHECK_THROWS_AS(sim_config_from_json("{"), InvalidParameter);
    CHECK_THROWS_AS(sim_config_from_json(R"({"classes": [{"probability": 0.5}]})"), InvalidParameter);

    const auto path = std::filesystem::temp_directory_path() / "shotsort_bad_config.json";
    {
        std::ofstream(path) << R"({"mean_photons": -1})";
    }
    try {
        load_sim_config(path.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.path() == path.string());
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_sim_config("/nonexistent/shotsort.json"), IoError);
}

TEST_CASE("class difference peaks early in the default scenario") {
    const SimConfig cfg = default_scenario();
    const auto curves = expected_class_traces(cfg);
    REQUIRE(curves.size() == 2);
    for (const auto& c : curves) CHECK(c.integral() == doctest::Approx(30.0).epsilon(0.01));
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < cfg.axis.n_samples; ++i) {
        if (cfg.axis.time(i) < 3.0) continue;
        const double d = std::abs(curves[0][i] - curves[1][i]);
        if (d > best) {
            best = d;
            arg = i;
        }
    }
    CHECK(cfg.axis.time(arg) >= 3.0);
    CHECK(cfg.axis.time(arg) <= 6.0);
}

TEST_CASE("content grows with photon number") {
    SimConfig cfg = default_scenario();
    std::mt19937_64 rng(23);
    const Roi window = default_ranking_window(cfg.axis);
    double prev = -1.0;
    for (std::size_t n : {5u, 20u, 80u}) {
        double acc = 0.0;
        for (int s = 0; s < 200; ++s)
            acc += signal_content(sample_shot(cfg.classes[0].intensity, n, cfg, rng), window);
        CHECK(acc / 200.0 > prev);
        prev = acc / 200.0;
    }
}

TEST_CASE("detector effects clip per-bin content and negatives") {
    SimConfig cfg = default_scenario();
    cfg.baseline_noise_sigma = 0.0;
    std::vector<double> v{20.0, 5.0, -1.0, 16.0};
    std::mt19937_64 rng(29);
    apply_detector_effects(v, cfg, rng);
    CHECK(v == std::vector<double>{16.0, 5.0, 0.0, 16.0});
    cfg.saturation_level.reset();
    std::vector<double> w{20.0};
    apply_detector_effects(w, cfg, rng);
    CHECK(w[0] == 20.0);
}
