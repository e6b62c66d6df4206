#include "shotsort/poisson_distance.hpp"

#include <algorithm>
#include <cmath>

#include "shotsort/error.hpp"
#include "shotsort/parallel.hpp"

namespace shotsort {

namespace {

void check_floor(double model_floor) {
    if (!(model_floor > 0.0))
        throw InvalidParameter("model floor must be positive");
}

void check_lengths(std::span<const double> a, std::span<const double> b, BinRange bins) {
    if (a.size() != b.size())
        throw InvalidParameter("data and model lengths differ");
    if (bins.last > a.size()) throw InvalidParameter("bin range exceeds trace length");
}

void check_same_axis(const Trace& a, const Trace& b) {
    if (!(a.axis() == b.axis())) throw InvalidParameter("traces do not share a time axis");
}

inline double term(double count, double expectation) {
    return -count * std::log(expectation) + expectation + std::lgamma(count + 1.0);
}

} // namespace

double poisson_nll(std::span<const double> data, std::span<const double> model,
                   double dt_ns, BinRange bins, double model_floor) {
    check_floor(model_floor);
    check_lengths(data, model, bins);
    double total = 0.0;
    for (std::size_t i = bins.first; i < bins.last; ++i) {
        const double c = std::max(data[i] * dt_ns, 0.0);
        const double m = std::max(model[i] * dt_ns, model_floor);
        total += term(c, m);
    }
    return total;
}

double poisson_nll(const Trace& data, const Trace& model, const Roi& roi,
                   double model_floor) {
    check_same_axis(data, model);
    return poisson_nll(data.values(), model.values(), data.axis().dt_ns,
                       roi.bins(data.axis()), model_floor);
}

double sym_distance(std::span<const double> a, std::span<const double> b, double dt_ns,
                    BinRange bins, double model_floor) {
    return std::max(poisson_nll(a, b, dt_ns, bins, model_floor),
                    poisson_nll(b, a, dt_ns, bins, model_floor));
}

double sym_distance(const Trace& a, const Trace& b, const Roi& roi, double model_floor) {
    check_same_axis(a, b);
    return sym_distance(a.values(), b.values(), a.axis().dt_ns, roi.bins(a.axis()),
                        model_floor);
}

DistanceMatrix distance_matrix(const ShotSet& set, std::span<const std::size_t> members,
                               const Roi& roi, double model_floor) {
    check_floor(model_floor);
    check_members(set, members);
    const BinRange bins = roi.bins(set.axis());
    const double dt = set.axis().dt_ns;
    const std::size_t n = members.size();
    DistanceMatrix dm(n);
    // Row i fills j >= i only, so each unordered pair is evaluated once and
    // every cell has exactly one writer.
    parallel::for_each_index(n, [&](std::size_t i) {
        for (std::size_t j = i; j < n; ++j)
            dm.set(i, j, sym_distance(set.row(members[i]), set.row(members[j]), dt, bins,
                                      model_floor));
    });
    return dm;
}

PairwiseTermTable::PairwiseTermTable(const ShotSet& set,
                                     std::span<const std::size_t> members,
                                     double model_floor)
    : n_(members.size()), stride_(set.n_samples() + 1) {
    check_floor(model_floor);
    check_members(set, members);
    const std::size_t bins = set.n_samples();
    const double dt = set.axis().dt_ns;

    // Per member: counts, lnGamma(counts + 1) and ln(floored expectation).
    std::vector<double> counts(n_ * bins), lgam(n_ * bins), logm(n_ * bins), expect(n_ * bins);
    for (std::size_t m = 0; m < n_; ++m) {
        auto r = set.row(members[m]);
        for (std::size_t i = 0; i < bins; ++i) {
            const double c = std::max(r[i] * dt, 0.0);
            const double e = std::max(r[i] * dt, model_floor);
            counts[m * bins + i] = c;
            lgam[m * bins + i] = std::lgamma(c + 1.0);
            expect[m * bins + i] = e;
            logm[m * bins + i] = std::log(e);
        }
    }

    prefix_.assign(n_ * n_ * stride_, 0.0);
    parallel::for_each_index(n_, [&](std::size_t i) {
        const double* c = &counts[i * bins];
        const double* g = &lgam[i * bins];
        for (std::size_t j = 0; j < n_; ++j) {
            const double* e = &expect[j * bins];
            const double* l = &logm[j * bins];
            double* out = &prefix_[(i * n_ + j) * stride_];
            double acc = 0.0;
            out[0] = 0.0;
            for (std::size_t b = 0; b < bins; ++b) {
                acc += -c[b] * l[b] + e[b] + g[b];
                out[b + 1] = acc;
            }
        }
    });
}

double PairwiseTermTable::directed(std::size_t i, std::size_t j, BinRange bins) const {
    const double* p = &prefix_[(i * n_ + j) * stride_];
    return p[bins.last] - p[bins.first];
}

DistanceMatrix PairwiseTermTable::matrix(BinRange bins) const {
    if (bins.last >= stride_) throw InvalidParameter("bin range exceeds table length");
    DistanceMatrix dm(n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i; j < n_; ++j)
            dm.set(i, j, std::max(directed(i, j, bins), directed(j, i, bins)));
    return dm;
}

} // namespace shotsort
