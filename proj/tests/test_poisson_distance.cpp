#include "doctest.h"

#include <cmath>

#include "shotsort/error.hpp"
#include "shotsort/poisson_distance.hpp"
#include "test_util.hpp"

using namespace shotsort;

namespace {

Trace tr(std::vector<double> v, double dt = 1.0) {
    const std::size_t n = v.size();
    if (n == 1) v.push_back(0.0);  // axes need two samples; the ROI skips the pad
    return Trace(TimeAxis::make(0.0, dt, v.size()), v);
}

// -a ln b + b + ln(a!) with the factorial expanded as a product.
long double brute_nll(const std::vector<int>& a, const std::vector<int>& b, double floor) {
    long double total = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double m = std::max<long double>(b[i], floor);
        long double fact = 1.0L;
        for (int j = 2; j <= a[i]; ++j) fact *= j;
        total += -a[i] * std::log(m) + m + std::log(fact);
    }
    return total;
}

} // namespace

TEST_CASE("nll examples") {
    const Roi one{0.0, 1.0};
    CHECK(poisson_nll(tr({1}), tr({1}), one) == doctest::Approx(1.0));
    CHECK(poisson_nll(tr({2}), tr({1}), one) == doctest::Approx(1.0 + std::log(2.0)));
    CHECK(sym_distance(tr({2}), tr({1}), one) == doctest::Approx(1.0 + std::log(2.0)));
    CHECK(poisson_nll(tr({1}), tr({2}), one) == doctest::Approx(2.0 - std::log(2.0)));
    CHECK(sym_distance(tr({1}), tr({1}), one) == doctest::Approx(1.0));

    const Trace zero = tr({0, 0, 0});
    const Trace model = tr({0.5, 0.0, 2.0});
    CHECK(poisson_nll(zero, model, Roi{0.0, 3.0}, 1e-3) ==
          doctest::Approx(0.5 + 1e-3 + 2.0));
}

TEST_CASE("nll uses counts per bin and clamps negative data") {
    const Trace a = tr({4.0, -1.0}, 0.5);
    const Trace b = tr({2.0, 2.0}, 0.5);
    // counts a = (2, 0), expectation b = (1, 1)
    const double expect = (-2 * std::log(1.0) + 1 + std::log(2.0)) + 1.0;
    CHECK(poisson_nll(a, b, Roi{0.0, 1.0}) == doctest::Approx(expect));
}

TEST_CASE("nll errors") {
    const Trace a = tr({1, 2});
    const Trace b(TimeAxis::make(0.0, 0.5, 2), {1, 2});
    CHECK_THROWS_AS(poisson_nll(a, b, Roi{0.0, 1.0}), InvalidParameter);
    CHECK_THROWS_AS(poisson_nll(a, a, Roi{0.0, 1.0}, 0.0), InvalidParameter);
}

TEST_CASE("nll matches a factorial brute force on integer traces") {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> len(2, 32), val(0, 12);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = len(rng);
        std::vector<int> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = val(rng);
            b[i] = val(rng);
        }
        const Trace ta = tr(std::vector<double>(a.begin(), a.end()));
        const Trace tb = tr(std::vector<double>(b.begin(), b.end()));
        const Roi all{0.0, static_cast<double>(n)};
        const double got = poisson_nll(ta, tb, all);
        const double want = static_cast<double>(brute_nll(a, b, kDefaultModelFloor));
        CHECK(testutil::rel_diff(got, want) < 1e-12);
        CHECK(sym_distance(ta, tb, all) == sym_distance(tb, ta, all));
    }
}

TEST_CASE("nll over constant models is minimised at the data mean") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(12);
        for (double& v : a) v = u(rng);
        const Trace ta = tr(a);
        const Roi all{0.0, 12.0};
        auto f = [&](double c) { return poisson_nll(ta, tr(std::vector<double>(12, c)), all); };
        // Golden-section search on [0.01, 10].
        double lo = 0.01, hi = 10.0;
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 200; ++it) {
            const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
            if (f(x1) < f(x2)) hi = x2; else lo = x1;
        }
        double mean = 0.0;
        for (double v : a) mean += v;
        mean /= 12.0;
        CHECK(0.5 * (lo + hi) == doctest::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("distance matrix equals the naive double loop") {
    std::mt19937_64 rng(23);
    const auto set = testutil::random_set(rng, 9, 40);
    const std::vector<std::size_t> members{8, 2, 5, 0, 3};
    const Roi roi{2.0, 13.5};
    const DistanceMatrix dm = distance_matrix(set, members, roi);
    REQUIRE(dm.size() == 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            const double naive = std::max(
                poisson_nll(set.trace(members[i]), set.trace(members[j]), roi),
                poisson_nll(set.trace(members[j]), set.trace(members[i]), roi));
            CHECK(dm(i, j) == naive);
        }
    CHECK(dm(1, 1) > 0.0);  // self-distance is stored as computed

    const std::vector<std::size_t> one{4};
    CHECK(distance_matrix(set, one, roi).size() == 1);
    const std::vector<std::size_t> dup{1, 1};
    CHECK_THROWS_AS(distance_matrix(set, dup, roi), InvalidParameter);
}

TEST_CASE("identical shots give equal off-diagonal distances") {
    const auto axis = TimeAxis::make(0.0, 0.5, 10);
    std::vector<double> row{0, 1, 3, 2, 0, 0, 4, 1, 1, 0};
    std::vector<double> data;
    for (int i = 0; i < 3; ++i) data.insert(data.end(), row.begin(), row.end());
    const ShotSet set(axis, 3, data);
    const auto dm = distance_matrix(set, testutil::iota(3), Roi{0.0, 5.0});
    CHECK(dm(0, 1) == dm(0, 2));
    CHECK(dm(1, 2) == dm(0, 1));
}

TEST_CASE("pairwise term table reproduces any ROI") {
    std::mt19937_64 rng(29);
    const auto set = testutil::random_set(rng, 12, 60);
    const std::vector<std::size_t> members{11, 3, 7, 0, 5, 9};
    const PairwiseTermTable table(set, members, kDefaultModelFloor);
    for (auto [s, e] : {std::pair{0.0, 30.0}, {3.0, 7.0}, {12.5, 13.0}, {20.0, 29.5}}) {
        const Roi roi{s, e};
        const DistanceMatrix fast = table.matrix(roi.bins(set.axis()));
        const DistanceMatrix ref = distance_matrix(set, members, roi);
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = 0; j < members.size(); ++j)
                CHECK(testutil::rel_diff(fast(i, j), ref(i, j)) < 1e-9);
    }
}
