#include "doctest.h"

#include <cmath>

#include "shotsort/core.hpp"
#include "shotsort/error.hpp"

using namespace shotsort;

TEST_CASE("time axis validation") {
    CHECK_THROWS_AS(TimeAxis::make(0.0, 0.0, 10), InvalidParameter);
    CHECK_THROWS_AS(TimeAxis::make(0.0, -1.0, 10), InvalidParameter);
    CHECK_THROWS_AS(TimeAxis::make(0.0, 0.5, 1), InvalidParameter);
    const auto axis = TimeAxis::make(0.0, 0.5, 300);
    CHECK(axis.end_ns() == doctest::Approx(150.0));
    CHECK(axis.time(6) == doctest::Approx(3.0));
}

TEST_CASE("roi selects the half-open sample range") {
    const auto axis = TimeAxis::make(0.0, 0.5, 300);
    const BinRange b = Roi{3.0, 7.0}.bins(axis);
    CHECK(b.first == 6);
    CHECK(b.last == 14);
    CHECK(b.size() == 8);

    // Start between samples rounds up; end on a sample excludes it.
    const BinRange c = Roi{3.2, 4.0}.bins(axis);
    CHECK(c.first == 7);
    CHECK(c.last == 8);

    const BinRange full = Roi{0.0, 150.0}.bins(axis);
    CHECK(full.first == 0);
    CHECK(full.last == 300);

    // A window narrower than dt can fall between samples.
    CHECK(Roi{3.1, 3.3}.bins(axis).empty());
}

TEST_CASE("roi errors") {
    const auto axis = TimeAxis::make(0.0, 0.5, 20);
    CHECK_THROWS_AS((Roi{5.0, 5.0}.bins(axis)), InvalidParameter);
    CHECK_THROWS_AS((Roi{6.0, 5.0}.bins(axis)), InvalidParameter);
    CHECK_THROWS_AS((Roi{-1.0, 5.0}.bins(axis)), InvalidParameter);
    CHECK_THROWS_AS((Roi{1.0, 10.5}.bins(axis)), InvalidParameter);
    CHECK_NOTHROW((Roi{1.0, 10.0}.bins(axis)));
}

TEST_CASE("trace construction") {
    const auto axis = TimeAxis::make(0.0, 0.5, 4);
    CHECK_THROWS_AS(Trace(axis, {1.0, 2.0}), InvalidParameter);
    CHECK_THROWS_AS(Trace(axis, {1.0, 2.0, NAN, 0.0}), InvalidParameter);
    const Trace t(axis, {1.0, 2.0, 3.0, 4.0});
    CHECK(t.integral() == doctest::Approx(5.0));
    CHECK(Trace::zeros(axis).integral() == 0.0);
}

TEST_CASE("shot set rows, subsets and labels") {
    const auto axis = TimeAxis::make(0.0, 1.0, 3);
    ShotSet set(axis, 3, {0, 1, 2, 10, 11, 12, 20, 21, 22});
    CHECK(set.row(1)[2] == 12.0);
    CHECK_THROWS_AS(ShotSet(axis, 2, {1, 2, 3}), InvalidParameter);
    CHECK_THROWS_AS(set.set_labels({0, 1}), InvalidParameter);
    set.set_labels({0, 1, 2});
    set.meta()["source"] = "test";

    const std::vector<std::size_t> idx{2, 0};
    const ShotSet sub = set.subset(idx);
    CHECK(sub.n_shots() == 2);
    CHECK(sub.row(0)[0] == 20.0);
    CHECK(sub.row(1)[1] == 1.0);
    REQUIRE(sub.labels());
    CHECK((*sub.labels())[0] == 2);
    CHECK(sub.meta().at("source") == "test");

    const std::vector<std::size_t> bad{0, 5};
    CHECK_THROWS_AS(set.subset(bad), InvalidParameter);
}

TEST_CASE("member checks") {
    const auto axis = TimeAxis::make(0.0, 1.0, 2);
    const ShotSet set(axis, 3, std::vector<double>(6, 1.0));
    const std::vector<std::size_t> dup{0, 1, 1};
    const std::vector<std::size_t> out{0, 3};
    const std::vector<std::size_t> ok{2, 0};
    CHECK_THROWS_AS(check_members(set, dup), InvalidParameter);
    CHECK_THROWS_AS(check_members(set, out), InvalidParameter);
    CHECK_NOTHROW(check_members(set, ok));
}
