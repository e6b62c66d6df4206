#include "doctest.h"

#include <cmath>
#include <numeric>

#include "shotsort/error.hpp"
#include "shotsort/trace_model.hpp"
#include "test_util.hpp"

using namespace shotsort;

TEST_CASE("fwhm to sigma") {
    CHECK(fwhm_to_sigma(2.0 * std::sqrt(2.0 * std::log(2.0))) == doctest::Approx(1.0));
}

TEST_CASE("detector kernel is a normalised truncated gaussian") {
    const DetectorKernel k = detector_kernel(2.5, 0.5, 1.0);
    const double sigma = fwhm_to_sigma(2.5);
    CHECK(k.sigma_ns == doctest::Approx(sigma));
    CHECK(k.half_width() == static_cast<std::size_t>(std::floor(4.0 * sigma / 0.5)));
    CHECK(k.samples.size() == 2 * k.half_width() + 1);
    const double sum = std::accumulate(k.samples.begin(), k.samples.end(), 0.0);
    CHECK(sum * 0.5 == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 1; j <= k.half_width(); ++j) {
        CHECK(k.samples[k.center() + j] == k.samples[k.center() - j]);
        // Ratio to the peak follows the Gaussian shape.
        const double off = 0.5 * static_cast<double>(j);
        CHECK(k.samples[k.center() + j] / k.samples[k.center()] ==
              doctest::Approx(std::exp(-off * off / (2 * sigma * sigma))));
    }
    const DetectorKernel k3 = detector_kernel(2.5, 0.5, 3.0);
    CHECK(std::accumulate(k3.samples.begin(), k3.samples.end(), 0.0) * 0.5 ==
          doctest::Approx(3.0));
    CHECK_THROWS_AS(detector_kernel(0.0, 0.5, 1.0), InvalidParameter);
}

TEST_CASE("photon pulse integrates to the kernel area") {
    const auto axis = TimeAxis::make(0.0, 0.5, 100);
    const DetectorKernel k = detector_kernel(2.5, 0.5, 1.0);
    for (double t : {10.0, 10.13, 24.77, 0.1, 49.9}) {
        std::vector<double> v(axis.n_samples, 0.0);
        add_photon_pulse(k, axis, t, v);
        const double integral = std::accumulate(v.begin(), v.end(), 0.0) * axis.dt_ns;
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Peak sits on the sample nearest to the arrival.
    std::vector<double> v(axis.n_samples, 0.0);
    add_photon_pulse(k, axis, 20.1, v);
    CHECK(std::max_element(v.begin(), v.end()) - v.begin() == 40);
}

TEST_CASE("photon equivalents divide and clamp") {
    const auto axis = TimeAxis::make(0.0, 1.0, 3);
    const Trace t = photon_equivalents(Trace(axis, {4.0, -2.0, 1.0}), 2.0);
    CHECK(t[0] == 2.0);
    CHECK(t[1] == 0.0);
    CHECK(t[2] == 0.5);
    CHECK_THROWS_AS(photon_equivalents(t, 0.0), InvalidParameter);
}

TEST_CASE("poisson band") {
    const auto axis = TimeAxis::make(0.0, 0.5, 2);
    const ShotSet set(axis, 2, {2.0, 0.0, 6.0, 0.0});
    const std::vector<std::size_t> all{0, 1};
    const UncertaintyBand b = poisson_band(set, all);
    CHECK(b.mean[0] == doctest::Approx(4.0));
    // counts = (2 + 6) * 0.5 = 4 -> sqrt(4) / 2 shots / 0.5 ns = 2
    CHECK(b.sigma[0] == doctest::Approx(2.0));
    CHECK(b.sigma[1] == 0.0);
    CHECK_THROWS_AS(poisson_band(set, std::vector<std::size_t>{}), InvalidParameter);
}

TEST_CASE("poisson band shrinks as 1/sqrt(M)") {
    const auto axis = TimeAxis::make(0.0, 1.0, 2);
    std::vector<double> data(400 * 2, 3.0);
    const ShotSet set(axis, 400, data);
    const auto m100 = testutil::iota(100);
    const auto m400 = testutil::iota(400);
    const double s100 = poisson_band(set, m100).sigma[0];
    const double s400 = poisson_band(set, m400).sigma[0];
    CHECK(s100 / s400 == doctest::Approx(2.0));
}

TEST_CASE("arrival sampler follows the bin weights") {
    const auto axis = TimeAxis::make(0.0, 1.0, 5);
    const std::vector<double> density{1.0, 0.0, 3.0, 0.0, 0.0};
    const ArrivalSampler s(axis, density);
    CHECK(s.total_weight() == 4.0);
    const auto p = s.bin_probabilities();
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[2] == doctest::Approx(0.75));

    std::mt19937_64 rng(7);
    std::vector<int> counts(5, 0);
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const double t = s.draw(rng);
        REQUIRE(t >= 0.0);
        REQUIRE(t < 5.0);
        ++counts[static_cast<std::size_t>(t)];
    }
    CHECK(counts[1] == 0);
    CHECK(counts[3] == 0);
    CHECK(counts[4] == 0);
    const double se = std::sqrt(n * 0.25 * 0.75);
    CHECK(std::abs(counts[0] - n * 0.25) < 4 * se);

    const std::vector<double> empty(5, 0.0);
    const ArrivalSampler none(axis, empty);
    CHECK_THROWS_AS(none.draw(rng), InvalidParameter);
    const std::vector<double> negative{1.0, -1.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(ArrivalSampler(axis, negative), InvalidParameter);
}

TEST_CASE("synthesized trace carries one photon-equivalent per photon") {
    const auto axis = TimeAxis::make(0.0, 0.5, 200);
    std::vector<double> density(axis.n_samples);
    for (std::size_t i = 0; i < density.size(); ++i) density[i] = std::exp(-axis.time(i) / 20.0);
    const ArrivalSampler s(axis, density);
    const DetectorKernel k = detector_kernel(2.5, 0.5, 1.0);
    std::mt19937_64 rng(3);
    const Trace t = synthesize_trace(s, k, axis, 17, rng);
    CHECK(t.integral() == doctest::Approx(17.0).epsilon(1e-10));
}
