#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "shotsort/error.hpp"
#include "shotsort/parallel.hpp"
#include "shotsort/pipeline.hpp"
#include "shotsort/silhouette_detail.hpp"

namespace shotsort {

namespace {
constexpr double kGridTolerance = 1e-9;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::size_t QualityMap::valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
}

QualityMap make_quality_grid(const TimeAxis& axis, const RoiGrid& grid, std::size_t n_hs) {
    if (!(grid.step_ns > 0.0)) throw InvalidParameter("roi grid: step must be positive");
    if (grid.min_start_ns < axis.t0_ns - kGridTolerance)
        throw InvalidParameter("roi grid: minimum start lies before the axis start");
    const double t_end = axis.end_ns();
    const double tol = kGridTolerance * std::max(1.0, std::abs(t_end));

    QualityMap qm;
    qm.n_hs = n_hs;
    for (std::size_t i = 0;; ++i) {
        const double s = grid.min_start_ns + static_cast<double>(i) * grid.step_ns;
        if (s > t_end - grid.step_ns + tol) break;
        qm.starts.push_back(s);
    }
    for (std::size_t j = 1;; ++j) {
        const double e = grid.min_start_ns + static_cast<double>(j) * grid.step_ns;
        if (e > t_end + tol) break;
        qm.ends.push_back(std::min(e, t_end));
    }
    qm.values.assign(qm.starts.size() * qm.ends.size(), kNaN);
    qm.valid.assign(qm.values.size(), 0);
    for (std::size_t si = 0; si < qm.starts.size(); ++si)
        for (std::size_t ei = 0; ei < qm.ends.size(); ++ei) {
            if (!(qm.ends[ei] > qm.starts[si] + tol)) continue;
            if (Roi{qm.starts[si], qm.ends[ei]}.bins(axis).empty()) continue;
            qm.valid[qm.index(si, ei)] = 1;
        }
    return qm;
}

QualityMap smooth_quality_map(const QualityMap& qm, double sigma_ns) {
    if (sigma_ns < 0.0 || !std::isfinite(sigma_ns))
        throw InvalidParameter("smooth_quality_map: sigma must be non-negative");
    if (sigma_ns == 0.0) return qm;

    QualityMap out = qm;
    const double reach = 4.0 * sigma_ns;
    const double inv_two_var = 1.0 / (2.0 * sigma_ns * sigma_ns);
    const std::size_t ns = qm.starts.size();
    const std::size_t ne = qm.ends.size();
    for (std::size_t si = 0; si < ns; ++si) {
        for (std::size_t ei = 0; ei < ne; ++ei) {
            if (!qm.is_valid(si, ei)) continue;
            double wsum = 0.0, acc = 0.0;
            for (std::size_t sj = 0; sj < ns; ++sj) {
                const double ds = qm.starts[sj] - qm.starts[si];
                if (std::abs(ds) > reach) continue;
                for (std::size_t ej = 0; ej < ne; ++ej) {
                    const double de = qm.ends[ej] - qm.ends[ei];
                    if (std::abs(de) > reach || !qm.is_valid(sj, ej)) continue;
                    const double w = std::exp(-(ds * ds + de * de) * inv_two_var);
                    wsum += w;
                    acc += w * qm.at(sj, ej);
                }
            }
            out.values[out.index(si, ei)] = acc / wsum;
        }
    }
    return out;
}

double roi_quality(const ShotSet& set, std::span<const std::size_t> members, const Roi& roi,
                   std::size_t k, double model_floor, bool normalize) {
    const DistanceMatrix dm = distance_matrix(set, members, roi, model_floor);
    const Partition p = agglomerate(dm, k);
    return silhouette(set, members, p, roi, model_floor, normalize).quality;
}

namespace {

// Per-member data terms shared by every partition.
struct MemberTerms {
    std::size_t n = 0;
    std::size_t bins = 0;
    std::vector<double> values;   // rates, member-major
    std::vector<double> counts;   // max(v dt, 0)
    std::vector<double> lgam;     // lnGamma(count + 1)
    std::vector<double> expect;   // max(v dt, floor)
    std::vector<double> log_expect;
};

MemberTerms member_terms(const ShotSet& set, std::span<const std::size_t> members,
                         double floor) {
    MemberTerms t;
    t.n = members.size();
    t.bins = set.n_samples();
    const double dt = set.axis().dt_ns;
    const std::size_t total = t.n * t.bins;
    t.values.resize(total);
    t.counts.resize(total);
    t.lgam.resize(total);
    t.expect.resize(total);
    t.log_expect.resize(total);
    for (std::size_t m = 0; m < t.n; ++m) {
        auto r = set.row(members[m]);
        for (std::size_t b = 0; b < t.bins; ++b) {
            const std::size_t i = m * t.bins + b;
            t.values[i] = r[b];
            t.counts[i] = std::max(r[b] * dt, 0.0);
            t.lgam[i] = std::lgamma(t.counts[i] + 1.0);
            t.expect[i] = std::max(r[b] * dt, floor);
            t.log_expect[i] = std::log(t.expect[i]);
        }
    }
    return t;
}

struct CellRef {
    std::size_t cell = 0;
    BinRange bins;
};

// Evaluates the silhouette quality of all cells sharing one partition. Terms
// are accumulated as prefix sums over the union of the cells' bin ranges.
void score_partition_group(const MemberTerms& t, const Partition& p,
                           std::span<const CellRef> cells, double dt, double floor,
                           bool normalize, std::vector<double>& out_values) {
    const std::size_t n = t.n;
    const std::size_t k = p.k;
    std::size_t lo = t.bins, hi = 0;
    for (const auto& c : cells) {
        lo = std::min(lo, c.bins.first);
        hi = std::max(hi, c.bins.last);
    }
    const std::size_t len = hi - lo;
    const std::size_t stride = len + 1;

    const auto clusters = p.clusters();
    // Cluster sums and full means over [lo, hi).
    std::vector<double> sums(k * len, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t m : clusters[c])
            for (std::size_t b = 0; b < len; ++b) sums[c * len + b] += t.values[m * t.bins + lo + b];

    // Model-side terms of each full cluster mean.
    std::vector<double> mean_expect(k * len), mean_log(k * len), mean_count(k * len),
        mean_lgam(k * len);
    for (std::size_t c = 0; c < k; ++c) {
        const double size = static_cast<double>(clusters[c].size());
        for (std::size_t b = 0; b < len; ++b) {
            const double v = sums[c * len + b] / size;
            const std::size_t i = c * len + b;
            mean_expect[i] = std::max(v * dt, floor);
            mean_log[i] = std::log(mean_expect[i]);
            mean_count[i] = std::max(v * dt, 0.0);
            mean_lgam[i] = std::lgamma(mean_count[i] + 1.0);
        }
    }

    // Prefix sums: own (shot|loo, loo|shot) and per cluster (shot|mean, mean|shot).
    std::vector<double> own_fwd(n * stride), own_bwd(n * stride);
    std::vector<double> mod_fwd(n * k * stride), mod_bwd(n * k * stride);
    for (std::size_t m = 0; m < n; ++m) {
        const std::size_t own = p.assignment[m];
        const std::size_t size = clusters[own].size();
        const double* cnt = &t.counts[m * t.bins + lo];
        const double* lg = &t.lgam[m * t.bins + lo];
        const double* ex = &t.expect[m * t.bins + lo];
        const double* lex = &t.log_expect[m * t.bins + lo];
        const double* val = &t.values[m * t.bins + lo];

        if (size >= 2) {
            double* f = &own_fwd[m * stride];
            double* g = &own_bwd[m * stride];
            f[0] = g[0] = 0.0;
            const double inv = 1.0 / static_cast<double>(size - 1);
            for (std::size_t b = 0; b < len; ++b) {
                const double loo = (sums[own * len + b] - val[b]) * inv;
                const double loo_e = std::max(loo * dt, floor);
                const double loo_c = std::max(loo * dt, 0.0);
                f[b + 1] = f[b] + (-cnt[b] * std::log(loo_e) + loo_e + lg[b]);
                g[b + 1] = g[b] + (-loo_c * lex[b] + ex[b] + std::lgamma(loo_c + 1.0));
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own) continue;
            double* f = &mod_fwd[(m * k + c) * stride];
            double* g = &mod_bwd[(m * k + c) * stride];
            f[0] = g[0] = 0.0;
            for (std::size_t b = 0; b < len; ++b) {
                const std::size_t i = c * len + b;
                f[b + 1] = f[b] + (-cnt[b] * mean_log[i] + mean_expect[i] + lg[b]);
                g[b + 1] = g[b] + (-mean_count[i] * lex[b] + ex[b] + mean_lgam[i]);
            }
        }
    }

    std::vector<double> d_own(n), d_model(n * k);
    for (const auto& cell : cells) {
        const std::size_t a = cell.bins.first - lo;
        const std::size_t z = cell.bins.last - lo;
        for (std::size_t m = 0; m < n; ++m) {
            const std::size_t own = p.assignment[m];
            d_own[m] = 0.0;
            if (clusters[own].size() >= 2) {
                const double* f = &own_fwd[m * stride];
                const double* g = &own_bwd[m * stride];
                d_own[m] = std::max(f[z] - f[a], g[z] - g[a]);
            }
            for (std::size_t c = 0; c < k; ++c) {
                d_model[m * k + c] = 0.0;
                if (c == own) continue;
                const double* f = &mod_fwd[(m * k + c) * stride];
                const double* g = &mod_bwd[(m * k + c) * stride];
                d_model[m * k + c] = std::max(f[z] - f[a], g[z] - g[a]);
            }
        }
        out_values[cell.cell] = detail::score_silhouette(p, d_own, d_model, normalize).quality;
    }
}

} // namespace

QualityMap scan_quality(const ShotSet& set, std::span<const std::size_t> members,
                        const RoiGrid& grid, std::size_t k, double model_floor,
                        bool normalize) {
    if (k < 2 || k + 1 > members.size())
        throw InvalidParameter("scan_quality: need 2 <= k <= members - 1");
    QualityMap qm = make_quality_grid(set.axis(), grid, members.size());

    std::vector<CellRef> cells;
    for (std::size_t si = 0; si < qm.starts.size(); ++si)
        for (std::size_t ei = 0; ei < qm.ends.size(); ++ei)
            if (qm.is_valid(si, ei))
                cells.push_back(
                    CellRef{qm.index(si, ei), Roi{qm.starts[si], qm.ends[ei]}.bins(set.axis())});
    if (cells.empty()) return qm;

    const PairwiseTermTable table(set, members, model_floor);
    std::vector<Partition> partitions(cells.size());
    parallel::for_each_index(
        cells.size(),
        [&](std::size_t c) { partitions[c] = agglomerate(table.matrix(cells[c].bins), k); }, 16);

    // Cells that cluster identically share their likelihood prefix sums.
    std::map<std::vector<std::size_t>, std::vector<std::size_t>> groups;
    for (std::size_t c = 0; c < cells.size(); ++c) groups[partitions[c].assignment].push_back(c);
    std::vector<std::vector<std::size_t>> group_cells;
    group_cells.reserve(groups.size());
    for (auto& [key, list] : groups) group_cells.push_back(std::move(list));

    const MemberTerms terms = member_terms(set, members, model_floor);
    const double dt = set.axis().dt_ns;
    parallel::for_each_index(group_cells.size(), [&](std::size_t g) {
        const auto& list = group_cells[g];
        std::vector<CellRef> refs;
        refs.reserve(list.size());
        for (std::size_t c : list) refs.push_back(cells[c]);
        score_partition_group(terms, partitions[list.front()], refs, dt, model_floor, normalize,
                              qm.values);
    });
    return qm;
}

} // namespace shotsort
