#include "shotsort/trace_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "shotsort/error.hpp"

namespace shotsort {

double fwhm_to_sigma(double fwhm_ns) {
    return fwhm_ns / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

DetectorKernel detector_kernel(double fwhm_ns, double dt_ns, double area) {
    if (!(fwhm_ns > 0.0) || !(dt_ns > 0.0) || !(area > 0.0))
        throw InvalidParameter("detector_kernel: fwhm, dt and area must be positive");

    DetectorKernel k;
    k.fwhm_ns = fwhm_ns;
    k.sigma_ns = fwhm_to_sigma(fwhm_ns);
    k.area = area;
    k.dt_ns = dt_ns;

    const auto half = static_cast<std::size_t>(
        std::floor(kKernelTruncationSigmas * k.sigma_ns / dt_ns));
    k.samples.resize(2 * half + 1);
    const double inv_two_var = 1.0 / (2.0 * k.sigma_ns * k.sigma_ns);
    for (std::size_t j = 0; j < k.samples.size(); ++j) {
        const double offset = (static_cast<double>(j) - static_cast<double>(half)) * dt_ns;
        k.samples[j] = std::exp(-offset * offset * inv_two_var);
    }
    // Symmetrise the sum explicitly so the kernel stays bit-symmetric.
    double sum = k.samples[half];
    for (std::size_t j = 1; j <= half; ++j) sum += 2.0 * k.samples[half + j];
    const double scale = area / (sum * dt_ns);
    for (double& v : k.samples) v *= scale;
    return k;
}

Trace photon_equivalents(const Trace& raw, double single_photon_area) {
    if (!(single_photon_area > 0.0))
        throw InvalidParameter("photon_equivalents: single-photon area must be positive");
    std::vector<double> out(raw.values().begin(), raw.values().end());
    for (double& v : out) v = std::max(0.0, v / single_photon_area);
    return Trace(raw.axis(), std::move(out));
}

void add_photon_pulse(const DetectorKernel& kernel, const TimeAxis& axis,
                      double arrival_ns, std::span<double> values) {
    const double reach = kKernelTruncationSigmas * kernel.sigma_ns;
    const double lo_t = (arrival_ns - reach - axis.t0_ns) / axis.dt_ns;
    const double hi_t = (arrival_ns + reach - axis.t0_ns) / axis.dt_ns;
    const auto n = static_cast<double>(axis.n_samples);
    const auto lo = static_cast<std::size_t>(std::clamp(std::ceil(lo_t), 0.0, n));
    const auto hi = static_cast<std::size_t>(std::clamp(std::floor(hi_t) + 1.0, 0.0, n));
    if (hi <= lo) return;

    const double inv_two_var = 1.0 / (2.0 * kernel.sigma_ns * kernel.sigma_ns);
    double weights[512];
    std::vector<double> heap;
    double* w = weights;
    if (hi - lo > 512) {
        heap.resize(hi - lo);
        w = heap.data();
    }
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double off = axis.time(i) - arrival_ns;
        w[i - lo] = std::exp(-off * off * inv_two_var);
        sum += w[i - lo];
    }
    if (!(sum > 0.0)) return;
    const double scale = kernel.area / (sum * axis.dt_ns);
    for (std::size_t i = lo; i < hi; ++i) values[i] += w[i - lo] * scale;
}

UncertaintyBand poisson_band(const ShotSet& shots, std::span<const std::size_t> members) {
    if (members.empty()) throw InvalidParameter("poisson_band: empty member list");
    check_members(shots, members);
    const std::size_t n = shots.n_samples();
    const double dt = shots.axis().dt_ns;
    std::vector<double> sum(n, 0.0);
    for (std::size_t m : members) {
        auto r = shots.row(m);
        for (std::size_t i = 0; i < n; ++i) sum[i] += r[i];
    }
    const auto count = static_cast<double>(members.size());
    std::vector<double> mean(n), sigma(n);
    for (std::size_t i = 0; i < n; ++i) {
        mean[i] = sum[i] / count;
        const double counts = std::max(0.0, sum[i] * dt);
        sigma[i] = std::sqrt(counts) / count / dt;
    }
    return UncertaintyBand{Trace(shots.axis(), std::move(mean)), std::move(sigma)};
}

ArrivalSampler::ArrivalSampler(const TimeAxis& axis, std::span<const double> density)
    : axis_(axis) {
    if (density.size() != axis.n_samples)
        throw InvalidParameter("arrival sampler: density length does not match axis");
    cumulative_.resize(density.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        if (density[i] < 0.0 || !std::isfinite(density[i]))
            throw InvalidParameter("arrival sampler: density must be finite and non-negative");
        acc += density[i];
        cumulative_[i] = acc;
    }
    total_ = acc;
}

double ArrivalSampler::draw(std::mt19937_64& rng) const {
    if (!(total_ > 0.0)) throw InvalidParameter("arrival sampler: density has no mass");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double target = u(rng) * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    // upper_bound never lands on a zero-weight bin: its cumulative equals its
    // predecessor's. Past the end (target rounded up to the total), step back
    // to the last bin that carries weight.
    if (it == cumulative_.end()) {
        --it;
        while (it != cumulative_.begin() && *it == *(it - 1)) --it;
    }
    const auto bin = static_cast<std::size_t>(it - cumulative_.begin());
    return axis_.time(bin) + u(rng) * axis_.dt_ns;
}

std::vector<double> ArrivalSampler::bin_probabilities() const {
    std::vector<double> p(cumulative_.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = (cumulative_[i] - prev) / total_;
        prev = cumulative_[i];
    }
    return p;
}

Trace synthesize_trace(const ArrivalSampler& sampler, const DetectorKernel& kernel,
                       const TimeAxis& axis, std::size_t n_photons,
                       std::mt19937_64& rng) {
    std::vector<double> values(axis.n_samples, 0.0);
    for (std::size_t p = 0; p < n_photons; ++p)
        add_photon_pulse(kernel, axis, sampler.draw(rng), values);
    return Trace(axis, std::move(values));
}

} // namespace shotsort
