#include "shotsort/signal_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "shotsort/error.hpp"
#include "shotsort/parallel.hpp"
#include "shotsort/random.hpp"

namespace shotsort {

double signal_content(std::span<const double> values, const TimeAxis& axis, BinRange bins) {
    if (bins.empty()) throw InvalidParameter("signal_content: empty window");
    if (bins.last > values.size())
        throw InvalidParameter("signal_content: window exceeds trace length");
    double acc = 0.0;
    for (std::size_t i = bins.first; i < bins.last; ++i)
        acc += std::log1p(std::max(values[i], 0.0));
    return acc * axis.dt_ns;
}

double signal_content(const Trace& shot, const Roi& window) {
    return signal_content(shot.values(), shot.axis(), window.bins(shot.axis()));
}

Roi default_ranking_window(const TimeAxis& axis) {
    return Roi{std::max(kMinRankingStartNs, axis.t0_ns), axis.end_ns()};
}

std::vector<std::size_t> ContentRanking::top(std::size_t n) const {
    if (n > order.size())
        throw InvalidParameter("ranking: requested " + std::to_string(n) +
                               " shots but only " + std::to_string(order.size()) +
                               " are available");
    return std::vector<std::size_t>(order.begin(), order.begin() + static_cast<long>(n));
}

ContentRanking rank_shots(const ShotSet& set, const Roi& window, bool allow_early_start) {
    if (!allow_early_start && window.start_ns < kMinRankingStartNs)
        throw InvalidParameter("rank_shots: window must start at or after 3 ns");
    const BinRange bins = window.bins(set.axis());
    if (bins.empty()) throw InvalidParameter("rank_shots: empty window");

    ContentRanking r;
    r.window = window;
    r.content.resize(set.n_shots());
    parallel::for_each_index(
        set.n_shots(),
        [&](std::size_t i) { r.content[i] = signal_content(set.row(i), set.axis(), bins); },
        256);
    r.order.resize(set.n_shots());
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
        return r.content[a] > r.content[b];
    });
    return r;
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(std::span<const double> xs) {
    if (xs.empty()) return {};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size() - 1))};
}

} // namespace

PhotonCalibration calibrate_photon_number(const Trace& average, const DetectorKernel& kernel,
                                          std::span<const int> n_values, std::size_t n_sims,
                                          const Roi& tail, const Roi& full,
                                          std::uint64_t rng_seed) {
    if (n_sims < 100) throw InvalidParameter("calibration: n_sims must be at least 100");
    const TimeAxis& axis = average.axis();
    const BinRange tail_bins = tail.bins(axis);
    const BinRange full_bins = full.bins(axis);
    if (tail_bins.empty() || full_bins.empty())
        throw InvalidParameter("calibration: empty window");

    std::vector<double> density(average.values().begin(), average.values().end());
    for (double v : density)
        if (v < 0.0) throw InvalidParameter("calibration: average trace must be non-negative");
    double tail_mass = 0.0;
    for (std::size_t i = tail_bins.first; i < tail_bins.last; ++i) tail_mass += density[i];
    if (!(tail_mass > 0.0)) throw InvalidParameter("calibration: zero mass in tail window");
    const ArrivalSampler sampler(axis, density);

    std::vector<int> ns(n_values.begin(), n_values.end());
    for (int n : ns)
        if (n < 0) throw InvalidParameter("calibration: photon numbers must be non-negative");
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

    PhotonCalibration cal;
    cal.tail_window = tail;
    cal.full_window = full;
    cal.entries.resize(ns.size());
    parallel::for_each_index(ns.size(), [&](std::size_t idx) {
        const int n = ns[idx];
        std::vector<double> tail_c(n_sims), full_c(n_sims);
        for (std::size_t s = 0; s < n_sims; ++s) {
            auto rng = derived_engine(rng_seed, stream::kCalibration,
                                      static_cast<std::uint64_t>(n) * 1'000'003ULL + s);
            const Trace t = synthesize_trace(sampler, kernel, axis,
                                             static_cast<std::size_t>(n), rng);
            tail_c[s] = signal_content(t.values(), axis, tail_bins);
            full_c[s] = signal_content(t.values(), axis, full_bins);
        }
        const MeanStd tail_stats = mean_std(tail_c);
        std::vector<double> selected;
        for (std::size_t s = 0; s < n_sims; ++s)
            if (std::abs(tail_c[s] - tail_stats.mean) <= tail_stats.std) selected.push_back(full_c[s]);
        const MeanStd full_stats = mean_std(selected);
        cal.entries[idx] = PhotonCalibration::Entry{n, full_stats.mean, full_stats.std};
    });
    return cal;
}

PhotonEstimate estimate_photons(double content_full, const PhotonCalibration& cal) {
    const auto& e = cal.entries;
    if (e.size() < 2) throw InvalidParameter("estimate_photons: need at least 2 calibration entries");
    if (content_full < e.front().content_mean)
        throw OutOfRange("estimate_photons: content below calibrated range", 0,
                         e.front().n_photons);
    if (content_full > e.back().content_mean)
        throw OutOfRange("estimate_photons: content above calibrated range", e.size() - 1,
                         e.back().n_photons);

    for (std::size_t k = 0; k + 1 < e.size(); ++k) {
        const auto& lo = e[k];
        const auto& hi = e[k + 1];
        const double span = hi.content_mean - lo.content_mean;
        if (content_full < lo.content_mean || content_full > hi.content_mean || !(span > 0.0))
            continue;
        const double w = (content_full - lo.content_mean) / span;
        const double dn = static_cast<double>(hi.n_photons - lo.n_photons);
        const double n_est = static_cast<double>(lo.n_photons) + w * dn;
        const double sd = lo.content_std + w * (hi.content_std - lo.content_std);
        return {n_est, sd * dn / span};
    }
    // Non-monotone table: the value sits above every segment it could bracket.
    throw OutOfRange("estimate_photons: content not bracketed by a monotone segment",
                     e.size() - 1, e.back().n_photons);
}

void write_calibration_csv(const PhotonCalibration& cal, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path, "cannot open for writing");
    out << "N,content_mean,content_std\n";
    char buf[128];
    for (const auto& e : cal.entries) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", e.n_photons, e.content_mean,
                      e.content_std);
        out << buf;
    }
    if (!out) throw IoError(path, "write failed");
}

} // namespace shotsort
