#pragma once
// End-to-end analysis: ROI / N_hs optimisation on clustering quality, model
// building from the highest-content shots, sorting of every shot, class
// curves, resampling stability and forced-k consistency checks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shotsort/clustering.hpp"
#include "shotsort/core.hpp"
#include "shotsort/poisson_distance.hpp"
#include "shotsort/signal_metrics.hpp"
#include "shotsort/trace_model.hpp"

namespace shotsort {

// Clustering quality over ROI (start, end) on a uniform grid. Cells with
// end <= start, or whose window holds no sample, are invalid.
struct QualityMap {
    std::size_t n_hs = 0;
    std::vector<double> starts;
    std::vector<double> ends;
    std::vector<double> values;     // starts.size() x ends.size(), row-major
    std::vector<std::uint8_t> valid;

    std::size_t index(std::size_t si, std::size_t ei) const { return si * ends.size() + ei; }
    bool is_valid(std::size_t si, std::size_t ei) const { return valid[index(si, ei)] != 0; }
    double at(std::size_t si, std::size_t ei) const { return values[index(si, ei)]; }
    std::size_t valid_count() const;
};

struct RoiGrid {
    double step_ns = 1.0;
    double min_start_ns = 3.0;
};

// Empty map (all values NaN) with validity set from the axis.
QualityMap make_quality_grid(const TimeAxis& axis, const RoiGrid& grid, std::size_t n_hs);

// Gaussian moving average over valid cells with per-cell renormalised
// weights; sigma in ns, support truncated at 4 sigma. sigma 0 is the identity.
QualityMap smooth_quality_map(const QualityMap& qm, double sigma_ns);

// Quality S of every grid cell for the given members, clustered into k.
QualityMap scan_quality(const ShotSet& set, std::span<const std::size_t> members,
                        const RoiGrid& grid, std::size_t k, double model_floor,
                        bool normalize = false);

// Reference evaluation of one cell: distance_matrix -> agglomerate -> silhouette.
double roi_quality(const ShotSet& set, std::span<const std::size_t> members, const Roi& roi,
                   std::size_t k, double model_floor, bool normalize = false);

struct AnalysisParams {
    std::size_t n_hs = 20;
    Roi roi{3.0, 7.0};
    std::size_t k = 2;
    double model_floor = kDefaultModelFloor;

    void validate(const ShotSet& set) const;
};

struct OptimizeOptions {
    std::vector<std::size_t> n_hs_candidates{10, 15, 20, 30, 50, 75, 100};
    RoiGrid grid;
    std::size_t k = 2;
    double sigma_ns = 1.0;
    double model_floor = kDefaultModelFloor;
    bool normalize = false;
};

struct OptimizationResult {
    AnalysisParams params;
    double quality = 0.0;               // smoothed S at the optimum
    double raw_quality = 0.0;           // unsmoothed S at the optimum
    std::vector<QualityMap> raw_maps;   // one per candidate, candidate order
    std::vector<QualityMap> smoothed_maps;
    ContentRanking ranking;
};

OptimizationResult optimize_parameters(const ShotSet& set, const OptimizeOptions& opts);

struct QualityOptimum {
    std::size_t map = 0;   // index into the map list
    std::size_t start = 0;
    std::size_t end = 0;
    double value = 0.0;
};

// Global maximum over valid cells of all maps. Ties go to the larger n_hs,
// then the earlier start, then the shorter ROI. Throws when no cell is valid.
QualityOptimum best_cell(std::span<const QualityMap> maps);

struct ModelSet {
    std::vector<Trace> models;
    std::vector<std::size_t> members;   // top n_hs shots, ranking order
    Partition partition;                // over members
};

ModelSet build_models(const ShotSet& set, const AnalysisParams& params);

// Index of the model with the lowest Poisson NLL per shot; ties to the lower id.
std::vector<std::size_t> sort_shots(const ShotSet& set, std::span<const Trace> models,
                                    const Roi& roi, double model_floor);

std::vector<UncertaintyBand> class_average(const ShotSet& set,
                                           std::span<const std::size_t> assignment,
                                           std::size_t k);

// Least-squares alpha minimising sum (y - alpha x)^2 over the window.
double fit_scale(const Trace& x, const Trace& y, const Roi& window);

struct SortResult {
    ModelSet models;
    std::vector<std::size_t> assignment;
    std::vector<UncertaintyBand> class_curves;
    std::vector<double> scale_factors;   // class c scaled onto class 0 over 0-100 ns
};

// build_models -> sort_shots -> class_average -> fit_scale.
SortResult run_sorting(const ShotSet& set, const AnalysisParams& params);

// Window used for scale fits when comparing class curves.
Roi comparison_scale_window(const TimeAxis& axis);

struct StabilityOptions {
    std::size_t n_subsets = 5;
    std::size_t n_reps = 10;
    std::uint64_t rng_seed = 1;
};

struct StabilityResult {
    SortResult full_run;
    // reconstructions[c][r]: class-c curve of reconstruction r after matching.
    std::vector<std::vector<Trace>> reconstructions;
    std::vector<std::vector<double>> std_band;   // per class, per bin
    std::vector<std::vector<double>> mean_curve; // per class, per bin
};

StabilityResult stability_analysis(const ShotSet& set, const AnalysisParams& params,
                                   const StabilityOptions& opts);

// Same as above but reuses an existing full-run result.
StabilityResult stability_analysis(const ShotSet& set, const AnalysisParams& params,
                                   const StabilityOptions& opts, SortResult full_run);

// Fraction of bins in `window` where |a - alpha b| <= z * sqrt(sa^2 + (alpha sb)^2),
// alpha = fit_scale(b, a, scale_window).
struct CurveAgreement {
    double fraction_within = 0.0;
    double scale = 1.0;
    std::size_t bins = 0;
};

CurveAgreement compare_curves(const Trace& a, std::span<const double> sigma_a, const Trace& b,
                              std::span<const double> sigma_b, const Roi& window,
                              const Roi& scale_window, double z);

struct ConsistencyOptions {
    StabilityOptions stability;
    double z = 3.0;
    double agree_fraction = 0.95;
    Roi window{3.0, 100.0};
};

struct PairVerdict {
    std::size_t a = 0;
    std::size_t b = 0;
    CurveAgreement agreement;
    bool agree = false;
};

struct ConsistencyReport {
    std::size_t k = 0;
    std::vector<PairVerdict> pairs;
    std::size_t agreeing_pairs = 0;
    std::string verdict;   // "agree" (all pairs), "distinct" (none) or "mixed"
    StabilityResult stability;
};

// Runs the sorting with params.k clusters and tests every pair of recovered
// class curves for agreement within combined Poisson + stability bands.
ConsistencyReport consistency_tests(const ShotSet& set, const AnalysisParams& params,
                                    const ConsistencyOptions& opts);

// Combined per-bin band: sqrt(poisson^2 + stability^2).
std::vector<double> combined_band(std::span<const double> poisson, std::span<const double> stability);

} // namespace shotsort
