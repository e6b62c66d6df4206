#include "shotsort/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shotsort/error.hpp"
#include "shotsort/parallel.hpp"
#include "shotsort/random.hpp"

namespace shotsort {

void AnalysisParams::validate(const ShotSet& set) const {
    if (k < 1) throw InvalidParameter("analysis: k must be at least 1");
    if (n_hs < k) throw InvalidParameter("analysis: n_hs must be at least k");
    if (n_hs > set.n_shots())
        throw InvalidParameter("analysis: n_hs = " + std::to_string(n_hs) + " exceeds the " +
                               std::to_string(set.n_shots()) + " available shots");
    if (!(model_floor > 0.0)) throw InvalidParameter("analysis: model floor must be positive");
    if (roi.bins(set.axis()).empty()) throw InvalidParameter("analysis: ROI holds no sample");
}

OptimizationResult optimize_parameters(const ShotSet& set, const OptimizeOptions& opts) {
    if (opts.n_hs_candidates.empty())
        throw InvalidParameter("optimize: no n_hs candidates");
    if (opts.k < 2) throw InvalidParameter("optimize: k must be at least 2");
    for (std::size_t n : opts.n_hs_candidates) {
        if (n < opts.k + 1)
            throw InvalidParameter("optimize: candidate n_hs = " + std::to_string(n) +
                                   " is below k + 1");
        if (n > set.n_shots())
            throw InvalidParameter("optimize: candidate n_hs = " + std::to_string(n) +
                                   " exceeds the number of shots");
    }

    OptimizationResult res;
    // Same ranking as build_models, so the scanned members are the model shots.
    res.ranking = rank_shots(set, default_ranking_window(set.axis()));

    for (std::size_t n : opts.n_hs_candidates) {
        const auto members = res.ranking.top(n);
        res.raw_maps.push_back(
            scan_quality(set, members, opts.grid, opts.k, opts.model_floor, opts.normalize));
        res.smoothed_maps.push_back(smooth_quality_map(res.raw_maps.back(), opts.sigma_ns));
    }

    const QualityOptimum best = best_cell(res.smoothed_maps);
    const QualityMap& qm = res.smoothed_maps[best.map];
    res.params.n_hs = qm.n_hs;
    res.params.roi = Roi{qm.starts[best.start], qm.ends[best.end]};
    res.quality = best.value;
    res.raw_quality = res.raw_maps[best.map].at(best.start, best.end);
    res.params.k = opts.k;
    res.params.model_floor = opts.model_floor;
    return res;
}

QualityOptimum best_cell(std::span<const QualityMap> maps) {
    // Visit maps from the largest n_hs down, then start and end ascending, and
    // keep strict improvements only.
    std::vector<std::size_t> by_n(maps.size());
    std::iota(by_n.begin(), by_n.end(), 0);
    std::stable_sort(by_n.begin(), by_n.end(),
                     [&](std::size_t a, std::size_t b) { return maps[a].n_hs > maps[b].n_hs; });
    QualityOptimum best;
    bool found = false;
    for (std::size_t m : by_n) {
        const QualityMap& qm = maps[m];
        for (std::size_t si = 0; si < qm.starts.size(); ++si)
            for (std::size_t ei = 0; ei < qm.ends.size(); ++ei) {
                if (!qm.is_valid(si, ei)) continue;
                const double v = qm.at(si, ei);
                if (std::isnan(v) || (found && !(v > best.value))) continue;
                best = QualityOptimum{m, si, ei, v};
                found = true;
            }
    }
    if (!found) throw InvalidParameter("optimize: no valid ROI cell on the grid");
    return best;
}

ModelSet build_models(const ShotSet& set, const AnalysisParams& params) {
    params.validate(set);
    ModelSet ms;
    ms.members = rank_shots(set, default_ranking_window(set.axis())).top(params.n_hs);
    if (params.k == 1) {
        ms.partition.k = 1;
        ms.partition.assignment.assign(ms.members.size(), 0);
    } else {
        const DistanceMatrix dm = distance_matrix(set, ms.members, params.roi, params.model_floor);
        ms.partition = agglomerate(dm, params.k);
    }
    for (const auto& cluster : ms.partition.clusters()) {
        std::vector<std::size_t> idx;
        idx.reserve(cluster.size());
        for (std::size_t m : cluster) idx.push_back(ms.members[m]);
        ms.models.push_back(cluster_model(set, idx));
    }
    return ms;
}

std::vector<std::size_t> sort_shots(const ShotSet& set, std::span<const Trace> models,
                                    const Roi& roi, double model_floor) {
    if (models.empty()) throw InvalidParameter("sort_shots: no models");
    if (!(model_floor > 0.0)) throw InvalidParameter("sort_shots: model floor must be positive");
    for (const auto& m : models)
        if (!(m.axis() == set.axis()))
            throw InvalidParameter("sort_shots: model axis differs from the shot axis");
    const BinRange bins = roi.bins(set.axis());
    const std::size_t len = bins.size();
    const std::size_t k = models.size();
    const double dt = set.axis().dt_ns;

    // The lnGamma(c + 1) term depends only on the shot, so it cannot change
    // the argmin and is left out.
    std::vector<double> expect(k * len), log_expect(k * len);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t b = 0; b < len; ++b) {
            const double m = std::max(models[c][bins.first + b] * dt, model_floor);
            expect[c * len + b] = m;
            log_expect[c * len + b] = std::log(m);
        }
    std::vector<double> mass(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t b = 0; b < len; ++b) mass[c] += expect[c * len + b];

    std::vector<std::size_t> assignment(set.n_shots());
    parallel::for_each_index(
        set.n_shots(),
        [&](std::size_t i) {
            const double* v = set.row(i).data() + bins.first;
            std::size_t best = 0;
            double best_nll = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double nll = mass[c];
                const double* lm = &log_expect[c * len];
                for (std::size_t b = 0; b < len; ++b) nll -= std::max(v[b] * dt, 0.0) * lm[b];
                if (nll < best_nll) {
                    best_nll = nll;
                    best = c;
                }
            }
            assignment[i] = best;
        },
        1024);
    return assignment;
}

std::vector<UncertaintyBand> class_average(const ShotSet& set,
                                           std::span<const std::size_t> assignment,
                                           std::size_t k) {
    if (assignment.size() != set.n_shots())
        throw InvalidParameter("class_average: assignment length differs from shot count");
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] >= k) throw InvalidParameter("class_average: class id out of range");
        members[assignment[i]].push_back(i);
    }
    std::vector<UncertaintyBand> out;
    out.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        if (members[c].empty()) throw DegenerateClass(c);
        out.push_back(poisson_band(set, members[c]));
    }
    return out;
}

double fit_scale(const Trace& x, const Trace& y, const Roi& window) {
    if (!(x.axis() == y.axis())) throw InvalidParameter("fit_scale: traces differ in axis");
    const BinRange bins = window.bins(x.axis());
    double xy = 0.0, xx = 0.0;
    for (std::size_t i = bins.first; i < bins.last; ++i) {
        xy += x[i] * y[i];
        xx += x[i] * x[i];
    }
    if (!(xx > 0.0)) throw InvalidParameter("fit_scale: reference trace is zero in the window");
    return xy / xx;
}

Roi comparison_scale_window(const TimeAxis& axis) {
    const double start = std::max(0.0, axis.t0_ns);
    const double end = std::min(100.0, axis.end_ns());
    if (!(end > start)) return Roi{axis.t0_ns, axis.end_ns()};
    return Roi{start, end};
}

SortResult run_sorting(const ShotSet& set, const AnalysisParams& params) {
    SortResult res;
    res.models = build_models(set, params);
    res.assignment = sort_shots(set, res.models.models, params.roi, params.model_floor);
    res.class_curves = class_average(set, res.assignment, res.models.models.size());
    const Roi scale_window = comparison_scale_window(set.axis());
    for (const auto& c : res.class_curves) {
        double alpha = 1.0;
        try {
            alpha = fit_scale(c.mean, res.class_curves.front().mean, scale_window);
        } catch (const InvalidParameter&) {
            alpha = 0.0;
        }
        res.scale_factors.push_back(alpha);
    }
    return res;
}

namespace {

// Best assignment of reconstruction classes onto reference classes under total
// Poisson NLL; perm[c] is the reconstruction class matched to reference c.
std::vector<std::size_t> match_classes(std::span<const UncertaintyBand> recon,
                                       std::span<const UncertaintyBand> reference,
                                       const Roi& window, double floor) {
    const std::size_t k = reference.size();
    std::vector<double> cost(k * k);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t r = 0; r < k; ++r)
            cost[c * k + r] = poisson_nll(recon[r].mean, reference[c].mean, window, floor);
    std::vector<std::size_t> perm(k), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) total += cost[c * k + perm[c]];
        if (total < best_cost) {
            best_cost = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

StabilityResult stability_analysis(const ShotSet& set, const AnalysisParams& params,
                                   const StabilityOptions& opts) {
    params.validate(set);
    return stability_analysis(set, params, opts, run_sorting(set, params));
}

StabilityResult stability_analysis(const ShotSet& set, const AnalysisParams& params,
                                   const StabilityOptions& opts, SortResult full_run) {
    params.validate(set);
    if (opts.n_subsets < 1 || opts.n_reps < 1)
        throw InvalidParameter("stability: subsets and repetitions must be at least 1");
    if (set.n_shots() / opts.n_subsets < params.n_hs)
        throw InvalidParameter("stability: subsets of " +
                               std::to_string(set.n_shots() / opts.n_subsets) +
                               " shots are smaller than n_hs = " + std::to_string(params.n_hs));
    const std::size_t k = full_run.class_curves.size();
    if (k > 8) throw InvalidParameter("stability: class matching supports at most 8 classes");

    // Splits: shuffle, then cut into n_subsets contiguous near-equal pieces.
    const std::size_t n = set.n_shots();
    std::vector<std::vector<std::size_t>> subsets;
    subsets.reserve(opts.n_reps * opts.n_subsets);
    for (std::size_t rep = 0; rep < opts.n_reps; ++rep) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        auto rng = derived_engine(opts.rng_seed, stream::kStabilitySplit, rep);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t s = 0; s < opts.n_subsets; ++s) {
            const std::size_t lo = s * n / opts.n_subsets;
            const std::size_t hi = (s + 1) * n / opts.n_subsets;
            std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                         perm.begin() + static_cast<std::ptrdiff_t>(hi));
            std::sort(idx.begin(), idx.end());
            subsets.push_back(std::move(idx));
        }
    }

    const Roi match_window = default_ranking_window(set.axis());
    std::vector<std::vector<Trace>> per_task(subsets.size());
    parallel::for_each_index(subsets.size(), [&](std::size_t t) {
        const ShotSet sub = set.subset(subsets[t]);
        const SortResult r = run_sorting(sub, params);
        const auto perm =
            match_classes(r.class_curves, full_run.class_curves, match_window, params.model_floor);
        per_task[t].reserve(k);
        for (std::size_t c = 0; c < k; ++c)
            per_task[t].push_back(Trace(set.axis(), std::vector<double>(
                                                        r.class_curves[perm[c]].mean.values().begin(),
                                                        r.class_curves[perm[c]].mean.values().end())));
    });

    StabilityResult res;
    res.reconstructions.assign(k, {});
    for (auto& task : per_task)
        for (std::size_t c = 0; c < k; ++c) res.reconstructions[c].push_back(std::move(task[c]));

    const std::size_t bins = set.n_samples();
    res.std_band.assign(k, std::vector<double>(bins, 0.0));
    res.mean_curve.assign(k, std::vector<double>(bins, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
        const auto& recs = res.reconstructions[c];
        const double count = static_cast<double>(recs.size());
        for (std::size_t b = 0; b < bins; ++b) {
            double sum = 0.0;
            for (const auto& r : recs) sum += r[b];
            const double mean = sum / count;
            double ss = 0.0;
            for (const auto& r : recs) ss += (r[b] - mean) * (r[b] - mean);
            res.mean_curve[c][b] = mean;
            res.std_band[c][b] = std::sqrt(ss / count);
        }
    }
    res.full_run = std::move(full_run);
    return res;
}

std::vector<double> combined_band(std::span<const double> poisson,
                                  std::span<const double> stability) {
    if (poisson.size() != stability.size())
        throw InvalidParameter("combined_band: band lengths differ");
    std::vector<double> out(poisson.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::sqrt(poisson[i] * poisson[i] + stability[i] * stability[i]);
    return out;
}

CurveAgreement compare_curves(const Trace& a, std::span<const double> sigma_a, const Trace& b,
                              std::span<const double> sigma_b, const Roi& window,
                              const Roi& scale_window, double z) {
    if (!(a.axis() == b.axis())) throw InvalidParameter("compare_curves: axes differ");
    if (sigma_a.size() != a.size() || sigma_b.size() != b.size())
        throw InvalidParameter("compare_curves: band length differs from curve length");
    CurveAgreement out;
    out.scale = fit_scale(b, a, scale_window);
    const BinRange bins = window.bins(a.axis());
    std::size_t within = 0;
    for (std::size_t i = bins.first; i < bins.last; ++i) {
        const double diff = std::abs(a[i] - out.scale * b[i]);
        const double sb = out.scale * sigma_b[i];
        if (diff <= z * std::sqrt(sigma_a[i] * sigma_a[i] + sb * sb)) ++within;
    }
    out.bins = bins.size();
    out.fraction_within = out.bins ? static_cast<double>(within) / static_cast<double>(out.bins) : 0.0;
    return out;
}

ConsistencyReport consistency_tests(const ShotSet& set, const AnalysisParams& params,
                                    const ConsistencyOptions& opts) {
    if (params.k < 2) throw InvalidParameter("consistency: k must be at least 2");
    ConsistencyReport rep;
    rep.k = params.k;
    rep.stability = stability_analysis(set, params, opts.stability);
    const auto& curves = rep.stability.full_run.class_curves;
    const Roi scale_window = comparison_scale_window(set.axis());

    std::vector<std::vector<double>> bands;
    for (std::size_t c = 0; c < curves.size(); ++c)
        bands.push_back(combined_band(curves[c].sigma, rep.stability.std_band[c]));

    for (std::size_t a = 0; a < curves.size(); ++a)
        for (std::size_t b = a + 1; b < curves.size(); ++b) {
            PairVerdict v;
            v.a = a;
            v.b = b;
            v.agreement = compare_curves(curves[a].mean, bands[a], curves[b].mean, bands[b],
                                         opts.window, scale_window, opts.z);
            v.agree = v.agreement.fraction_within >= opts.agree_fraction;
            if (v.agree) ++rep.agreeing_pairs;
            rep.pairs.push_back(v);
        }
    if (rep.agreeing_pairs == rep.pairs.size())
        rep.verdict = "agree";
    else if (rep.agreeing_pairs == 0)
        rep.verdict = "distinct";
    else
        rep.verdict = "mixed";
    return rep;
}

} // namespace shotsort
