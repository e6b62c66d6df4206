#pragma once
// Core value types shared by every module: the time axis, analysis windows,
// single traces and shot collections.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shotsort {

struct TimeAxis {
    double t0_ns = 0.0;
    double dt_ns = 0.5;
    std::size_t n_samples = 2;

    // Throws InvalidParameter unless dt > 0 and n_samples >= 2.
    static TimeAxis make(double t0_ns, double dt_ns, std::size_t n_samples);

    double time(std::size_t i) const { return t0_ns + static_cast<double>(i) * dt_ns; }
    double end_ns() const { return t0_ns + static_cast<double>(n_samples) * dt_ns; }

    void validate() const;
    bool operator==(const TimeAxis&) const = default;
};

// Half-open bin index range [first, last).
struct BinRange {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const { return last > first ? last - first : 0; }
    bool empty() const { return last <= first; }
};

// Half-open analysis window [start, end) on the time axis.
struct Roi {
    double start_ns = 0.0;
    double end_ns = 0.0;

    // Bins whose sample time lies in [start, end). Throws InvalidParameter when
    // end <= start or the window leaves the axis span.
    BinRange bins(const TimeAxis& axis) const;
    double width() const { return end_ns - start_ns; }
    bool operator==(const Roi&) const = default;
};

// Uniformly sampled non-negative time series in photon-equivalents per ns.
class Trace {
public:
    Trace() = default;
    Trace(TimeAxis axis, std::vector<double> values);

    static Trace zeros(const TimeAxis& axis);

    const TimeAxis& axis() const { return axis_; }
    std::span<const double> values() const { return values_; }
    std::span<double> mutable_values() { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    // sum(values) * dt, i.e. integrated photon-equivalents.
    double integral() const;

private:
    TimeAxis axis_;
    std::vector<double> values_;
};

using Meta = std::map<std::string, std::string>;

// Shots sharing one time axis, stored row-major (n_shots x n_samples).
class ShotSet {
public:
    ShotSet() = default;
    ShotSet(TimeAxis axis, std::size_t n_shots, std::vector<double> data);
    ShotSet(TimeAxis axis, const std::vector<Trace>& traces);

    const TimeAxis& axis() const { return axis_; }
    std::size_t n_shots() const { return n_shots_; }
    std::size_t n_samples() const { return axis_.n_samples; }

    std::span<const double> row(std::size_t i) const;
    std::span<double> mutable_row(std::size_t i);
    Trace trace(std::size_t i) const;
    std::span<const double> data() const { return data_; }

    const std::optional<std::vector<std::uint8_t>>& labels() const { return labels_; }
    void set_labels(std::vector<std::uint8_t> labels);
    void clear_labels() { labels_.reset(); }

    const Meta& meta() const { return meta_; }
    Meta& meta() { return meta_; }

    // Copy of the listed shots, in the given order; labels follow their shots.
    ShotSet subset(std::span<const std::size_t> indices) const;

private:
    TimeAxis axis_;
    std::size_t n_shots_ = 0;
    std::vector<double> data_;
    std::optional<std::vector<std::uint8_t>> labels_;
    Meta meta_;
};

// Throws InvalidParameter if the indices are out of range or repeat.
void check_members(const ShotSet& set, std::span<const std::size_t> members);

} // namespace shotsort
