#include "shotsort/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "shotsort/error.hpp"

namespace shotsort {

namespace {
constexpr double kEdgeTolerance = 1e-9;
}

TimeAxis TimeAxis::make(double t0_ns, double dt_ns, std::size_t n_samples) {
    TimeAxis axis{t0_ns, dt_ns, n_samples};
    axis.validate();
    return axis;
}

void TimeAxis::validate() const {
    if (!(dt_ns > 0.0) || !std::isfinite(dt_ns))
        throw InvalidParameter("time axis: dt_ns must be positive");
    if (!std::isfinite(t0_ns))
        throw InvalidParameter("time axis: t0_ns must be finite");
    if (n_samples < 2)
        throw InvalidParameter("time axis: n_samples must be at least 2");
}

BinRange Roi::bins(const TimeAxis& axis) const {
    if (!(end_ns > start_ns)) {
        std::ostringstream os;
        os << "roi [" << start_ns << ", " << end_ns << "): end must exceed start";
        throw InvalidParameter(os.str());
    }
    const double span_tol = kEdgeTolerance * std::max(1.0, std::abs(axis.end_ns()));
    if (start_ns < axis.t0_ns - span_tol || end_ns > axis.end_ns() + span_tol) {
        std::ostringstream os;
        os << "roi [" << start_ns << ", " << end_ns << ") outside axis span ["
           << axis.t0_ns << ", " << axis.end_ns() << ")";
        throw InvalidParameter(os.str());
    }
    auto first_index = [&](double t) {
        double x = std::ceil((t - axis.t0_ns) / axis.dt_ns - kEdgeTolerance);
        x = std::clamp(x, 0.0, static_cast<double>(axis.n_samples));
        return static_cast<std::size_t>(x);
    };
    return BinRange{first_index(start_ns), first_index(end_ns)};
}

Trace::Trace(TimeAxis axis, std::vector<double> values)
    : axis_(axis), values_(std::move(values)) {
    axis_.validate();
    if (values_.size() != axis_.n_samples)
        throw InvalidParameter("trace: value count " + std::to_string(values_.size()) +
                               " does not match axis length " +
                               std::to_string(axis_.n_samples));
    for (double v : values_)
        if (!std::isfinite(v)) throw InvalidParameter("trace: non-finite value");
}

Trace Trace::zeros(const TimeAxis& axis) {
    return Trace(axis, std::vector<double>(axis.n_samples, 0.0));
}

double Trace::integral() const {
    return std::accumulate(values_.begin(), values_.end(), 0.0) * axis_.dt_ns;
}

ShotSet::ShotSet(TimeAxis axis, std::size_t n_shots, std::vector<double> data)
    : axis_(axis), n_shots_(n_shots), data_(std::move(data)) {
    axis_.validate();
    if (data_.size() != n_shots_ * axis_.n_samples)
        throw InvalidParameter("shot set: data size does not match n_shots x n_samples");
}

ShotSet::ShotSet(TimeAxis axis, const std::vector<Trace>& traces)
    : axis_(axis), n_shots_(traces.size()) {
    axis_.validate();
    data_.reserve(n_shots_ * axis_.n_samples);
    for (const auto& t : traces) {
        if (!(t.axis() == axis_))
            throw InvalidParameter("shot set: trace axis differs from set axis");
        data_.insert(data_.end(), t.values().begin(), t.values().end());
    }
}

std::span<const double> ShotSet::row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * axis_.n_samples, axis_.n_samples);
}

std::span<double> ShotSet::mutable_row(std::size_t i) {
    return std::span<double>(data_).subspan(i * axis_.n_samples, axis_.n_samples);
}

Trace ShotSet::trace(std::size_t i) const {
    auto r = row(i);
    return Trace(axis_, std::vector<double>(r.begin(), r.end()));
}

void ShotSet::set_labels(std::vector<std::uint8_t> labels) {
    if (labels.size() != n_shots_)
        throw InvalidParameter("labels: length " + std::to_string(labels.size()) +
                               " does not match shot count " + std::to_string(n_shots_));
    labels_ = std::move(labels);
}

ShotSet ShotSet::subset(std::span<const std::size_t> indices) const {
    std::vector<double> data;
    data.reserve(indices.size() * axis_.n_samples);
    for (std::size_t idx : indices) {
        if (idx >= n_shots_) throw InvalidParameter("subset: shot index out of range");
        auto r = row(idx);
        data.insert(data.end(), r.begin(), r.end());
    }
    ShotSet out(axis_, indices.size(), std::move(data));
    if (labels_) {
        std::vector<std::uint8_t> l;
        l.reserve(indices.size());
        for (std::size_t idx : indices) l.push_back((*labels_)[idx]);
        out.labels_ = std::move(l);
    }
    out.meta_ = meta_;
    return out;
}

void check_members(const ShotSet& set, std::span<const std::size_t> members) {
    std::vector<std::size_t> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty() && sorted.back() >= set.n_shots())
        throw InvalidParameter("member index " + std::to_string(sorted.back()) +
                               " out of range for " + std::to_string(set.n_shots()) +
                               " shots");
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidParameter("duplicate member indices");
}

} // namespace shotsort
