#include "shotsort/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "shotsort/dataset_io.hpp"
#include "shotsort/error.hpp"
#include "shotsort/evaluation.hpp"
#include "shotsort/parallel.hpp"
#include "shotsort/pipeline.hpp"
#include "shotsort/simulator.hpp"

namespace shotsort::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string input;
    std::string out;
    std::string config;
    std::string params;
    std::string assignment;
    std::string truth;
    std::size_t k = 2;
    std::size_t k_max = 0;
    std::vector<std::size_t> n_hs;
    std::vector<double> roi;
    double roi_step_ns = 1.0;
    double roi_min_start_ns = kMinRankingStartNs;
    double sigma_ns = 1.0;
    double model_floor = kDefaultModelFloor;
    std::size_t subsets = 5;
    std::size_t reps = 10;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::vector<int> n_values{1, 2, 5, 10, 20, 50, 100, 200};
    std::size_t sims = 1000;
    double fwhm_ns = 0.0;
    double tail_start_ns = 20.0;

    // Set after parsing: which overrides were given explicitly.
    bool k_given = false;
    bool seed_given = false;
    bool floor_given = false;
};

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ojson report_header(const std::string& command) {
    ojson r;
    r["schema_version"] = 1;
    r["command"] = command;
    r["generated_at"] = timestamp();
    return r;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string(), "write failed");
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

ojson read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return ojson::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path, std::string("invalid JSON: ") + e.what());
    }
}

fs::path prepare_dir(const std::string& out) {
    if (out.empty()) throw UsageError("--out is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError(out, "cannot create output directory: " + ec.message());
    return fs::path(out);
}

ShotSet load_blinded(const Options& o) {
    if (o.input.empty()) throw UsageError("--input is required");
    return blind_labels(read_bundle(o.input));
}

ojson roi_json(const Roi& r) { return ojson::array({r.start_ns, r.end_ns}); }

ojson params_json(const AnalysisParams& p) {
    ojson j;
    j["schema_version"] = 1;
    j["n_hs"] = p.n_hs;
    j["roi_start_ns"] = p.roi.start_ns;
    j["roi_end_ns"] = p.roi.end_ns;
    j["k"] = p.k;
    j["model_floor"] = p.model_floor;
    return j;
}

AnalysisParams params_from_file(const std::string& path) {
    const ojson j = read_json(path);
    AnalysisParams p;
    try {
        p.n_hs = j.at("n_hs").get<std::size_t>();
        p.roi = Roi{j.at("roi_start_ns").get<double>(), j.at("roi_end_ns").get<double>()};
        p.k = j.at("k").get<std::size_t>();
        if (j.contains("model_floor")) p.model_floor = j["model_floor"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path, std::string("malformed parameter file: ") + e.what());
    }
    return p;
}

// --params file, then explicit flag overrides.
AnalysisParams resolve_params(const Options& o, const ShotSet& set) {
    AnalysisParams p;
    if (!o.params.empty()) {
        p = params_from_file(o.params);
    } else if (o.roi.empty() || o.n_hs.empty()) {
        throw UsageError("give --params, or both --roi and --n-hs");
    }
    if (o.n_hs.size() > 1) throw UsageError("--n-hs takes a single value for this command");
    if (!o.n_hs.empty()) p.n_hs = o.n_hs.front();
    if (!o.roi.empty()) p.roi = Roi{o.roi[0], o.roi[1]};
    if (o.k_given) p.k = o.k;
    if (o.floor_given) p.model_floor = o.model_floor;
    p.validate(set);
    return p;
}

std::string class_name(std::size_t c) { return "class" + std::to_string(c); }

// ---- stages -----------------------------------------------------------------

ojson stage_rank(const ShotSet& set, const fs::path& dir) {
    const ContentRanking r = rank_shots(set, default_ranking_window(set.axis()));
    std::ostringstream csv;
    csv << "rank,shot,content\n";
    for (std::size_t i = 0; i < r.order.size(); ++i)
        csv << i << ',' << r.order[i] << ',' << format_number(r.content[r.order[i]]) << '\n';
    write_text(dir / "ranking.csv", csv.str());

    ojson s;
    s["window_ns"] = roi_json(r.window);
    s["n_shots"] = set.n_shots();
    s["max_content"] = r.content[r.order.front()];
    s["file"] = "ranking.csv";
    std::cout << "rank: " << set.n_shots() << " shots, max content "
              << format_number(r.content[r.order.front()]) << "\n";
    return s;
}

void write_quality_csv(const fs::path& path, const QualityMap& qm) {
    std::ostringstream csv;
    csv << "start_ns,end_ns,S\n";
    for (std::size_t si = 0; si < qm.starts.size(); ++si)
        for (std::size_t ei = 0; ei < qm.ends.size(); ++ei)
            if (qm.is_valid(si, ei))
                csv << format_number(qm.starts[si]) << ',' << format_number(qm.ends[ei]) << ','
                    << format_number(qm.at(si, ei)) << '\n';
    write_text(path, csv.str());
}

OptimizeOptions optimize_options(const Options& o) {
    OptimizeOptions opt;
    if (!o.n_hs.empty()) opt.n_hs_candidates = o.n_hs;
    opt.grid = RoiGrid{o.roi_step_ns, o.roi_min_start_ns};
    opt.k = o.k;
    opt.sigma_ns = o.sigma_ns;
    opt.model_floor = o.model_floor;
    return opt;
}

ojson stage_optimize(const ShotSet& set, const Options& o, const fs::path& dir,
                     AnalysisParams& chosen) {
    const OptimizationResult res = optimize_parameters(set, optimize_options(o));
    chosen = res.params;
    write_json(dir / "params.json", params_json(res.params));

    ojson maps = ojson::array();
    for (std::size_t c = 0; c < res.raw_maps.size(); ++c) {
        const std::size_t n = res.raw_maps[c].n_hs;
        const std::string smooth_file = "quality_nhs" + std::to_string(n) + ".csv";
        const std::string raw_file = "quality_raw_nhs" + std::to_string(n) + ".csv";
        write_quality_csv(dir / smooth_file, res.smoothed_maps[c]);
        write_quality_csv(dir / raw_file, res.raw_maps[c]);

        const QualityMap& qm = res.smoothed_maps[c];
        double best = -std::numeric_limits<double>::infinity();
        Roi best_roi;
        for (std::size_t si = 0; si < qm.starts.size(); ++si)
            for (std::size_t ei = 0; ei < qm.ends.size(); ++ei)
                if (qm.is_valid(si, ei) && qm.at(si, ei) > best) {
                    best = qm.at(si, ei);
                    best_roi = Roi{qm.starts[si], qm.ends[ei]};
                }
        ojson m;
        m["n_hs"] = n;
        m["max_smoothed_S"] = best;
        m["max_roi_ns"] = roi_json(best_roi);
        m["file"] = smooth_file;
        m["raw_file"] = raw_file;
        maps.push_back(m);
    }

    ojson s;
    s["params"] = params_json(res.params);
    s["quality"] = res.quality;
    s["raw_quality"] = res.raw_quality;
    s["sigma_ns"] = o.sigma_ns;
    s["roi_step_ns"] = o.roi_step_ns;
    s["roi_min_start_ns"] = o.roi_min_start_ns;
    s["maps"] = maps;
    s["file"] = "params.json";
    std::cout << "optimize: n_hs=" << res.params.n_hs << " roi=[" << format_number(res.params.roi.start_ns)
              << ", " << format_number(res.params.roi.end_ns) << ") ns S=" << format_number(res.quality)
              << "\n";
    return s;
}

ojson stage_sort(const ShotSet& set, const AnalysisParams& p, const fs::path& dir,
                 SortResult& result) {
    result = run_sorting(set, p);
    std::ostringstream csv;
    csv << "shot,class\n";
    for (std::size_t i = 0; i < result.assignment.size(); ++i)
        csv << i << ',' << result.assignment[i] << '\n';
    write_text(dir / "assignment.csv", csv.str());

    std::vector<Curve> curves, models;
    for (std::size_t c = 0; c < result.class_curves.size(); ++c) {
        curves.push_back(Curve{class_name(c), result.class_curves[c].mean, result.class_curves[c].sigma});
        models.push_back(Curve{"model" + std::to_string(c), result.models.models[c], std::nullopt});
    }
    export_curves(curves, (dir / "class_curves.csv").string());
    export_curves(models, (dir / "models.csv").string());

    std::vector<std::size_t> counts(result.class_curves.size(), 0);
    for (std::size_t a : result.assignment) ++counts[a];
    ojson s;
    s["params"] = params_json(p);
    s["class_counts"] = counts;
    s["model_sizes"] = result.models.partition.sizes();
    s["scale_factors"] = result.scale_factors;
    s["scale_window_ns"] = roi_json(comparison_scale_window(set.axis()));
    s["files"] = {{"assignment", "assignment.csv"},
                  {"class_curves", "class_curves.csv"},
                  {"models", "models.csv"}};
    std::cout << "sort: class counts";
    for (std::size_t c : counts) std::cout << ' ' << c;
    std::cout << "\n";
    return s;
}

ojson stage_analyze(const ShotSet& set, const AnalysisParams& p, const Options& o,
                    const ModelSet& models, const fs::path& dir) {
    ojson s;
    s["params"] = params_json(p);
    if (p.k >= 2) {
        const SilhouetteReport sil = silhouette(set, models.members, models.partition, p.roi,
                                                p.model_floor);
        std::ostringstream csv;
        csv << "cluster,shot,score\n";
        for (std::size_t c = 0; c < models.partition.k; ++c)
            for (std::size_t m = 0; m < models.members.size(); ++m)
                if (models.partition.assignment[m] == c)
                    csv << c << ',' << models.members[m] << ',' << format_number(sil.per_member[m])
                        << '\n';
        write_text(dir / "silhouette.csv", csv.str());
        s["silhouette"] = {{"quality", sil.quality},
                           {"per_cluster_mean", sil.per_cluster_mean},
                           {"file", "silhouette.csv"}};
    }

    const std::size_t k_max =
        o.k_max > 0 ? o.k_max : std::min<std::size_t>(6, p.n_hs > 1 ? p.n_hs - 1 : 1);
    if (k_max >= 2 && k_max + 1 <= p.n_hs) {
        const ClusterCountSelection sel =
            select_num_clusters(set, models.members, p.roi, k_max, p.model_floor);
        std::ostringstream csv;
        csv << "k,S\n";
        for (std::size_t i = 0; i < sel.quality.size(); ++i)
            csv << i + 2 << ',' << format_number(sel.quality[i]) << '\n';
        write_text(dir / "cluster_count.csv", csv.str());
        s["cluster_count"] = {{"k_best", sel.k_best},
                              {"quality", sel.quality},
                              {"file", "cluster_count.csv"}};
        std::cout << "analyze: k_best=" << sel.k_best;
    } else {
        std::cout << "analyze: cluster count scan skipped";
    }
    if (s.contains("silhouette"))
        std::cout << " S=" << format_number(s["silhouette"]["quality"].get<double>());
    std::cout << "\n";
    return s;
}

ojson stability_json(const StabilityResult& st, const Options& o) {
    ojson s;
    s["n_subsets"] = o.subsets;
    s["n_reps"] = o.reps;
    s["seed"] = o.seed;
    s["reconstructions_per_class"] =
        st.reconstructions.empty() ? 0 : st.reconstructions.front().size();
    return s;
}

void write_stability_csv(const fs::path& path, const StabilityResult& st) {
    std::vector<Curve> curves;
    for (std::size_t c = 0; c < st.std_band.size(); ++c) {
        curves.push_back(Curve{class_name(c), st.full_run.class_curves[c].mean, st.std_band[c]});
        curves.push_back(Curve{class_name(c) + "_resampled_mean",
                               Trace(st.full_run.class_curves[c].mean.axis(), st.mean_curve[c]),
                               std::nullopt});
    }
    export_curves(curves, path.string());
}

StabilityOptions stability_options(const Options& o) {
    return StabilityOptions{o.subsets, o.reps, o.seed};
}

// ---- commands ---------------------------------------------------------------

int cmd_simulate(const Options& o) {
    if (o.out.empty()) throw UsageError("--out is required");
    SimConfig cfg = o.config.empty() ? default_scenario() : load_sim_config(o.config);
    if (o.seed_given) cfg.rng_seed = o.seed;
    const SimulatedExperiment ex = generate_experiment(cfg);
    const fs::path out(o.out);
    if (out.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(out.parent_path(), ec);
    }
    write_bundle(ex.set, o.out);
    std::ostringstream csv;
    csv << "shot,label,n_photons\n";
    for (std::size_t i = 0; i < ex.photons.size(); ++i)
        csv << i << ',' << static_cast<int>((*ex.set.labels())[i]) << ',' << ex.photons[i] << '\n';
    write_text(o.out + ".truth.csv", csv.str());
    std::cout << "simulate: " << ex.set.n_shots() << " shots x " << ex.set.n_samples()
              << " samples, " << cfg.classes.size() << " classes -> " << o.out << "\n";
    return 0;
}

int cmd_rank(const Options& o) {
    const ShotSet set = load_blinded(o);
    const fs::path dir = prepare_dir(o.out);
    ojson r = report_header("rank");
    r["input"] = o.input;
    r["rank"] = stage_rank(set, dir);
    write_json(dir / "report.json", r);
    return 0;
}

int cmd_optimize(const Options& o) {
    const ShotSet set = load_blinded(o);
    const fs::path dir = prepare_dir(o.out);
    AnalysisParams p;
    ojson r = report_header("optimize");
    r["input"] = o.input;
    r["optimize"] = stage_optimize(set, o, dir, p);
    write_json(dir / "report.json", r);
    return 0;
}

int cmd_sort(const Options& o) {
    const ShotSet set = load_blinded(o);
    const AnalysisParams p = resolve_params(o, set);
    const fs::path dir = prepare_dir(o.out);
    SortResult res;
    ojson r = report_header("sort");
    r["input"] = o.input;
    r["sort"] = stage_sort(set, p, dir, res);
    write_json(dir / "report.json", r);
    return 0;
}

int cmd_analyze(const Options& o) {
    const ShotSet set = load_blinded(o);
    const AnalysisParams p = resolve_params(o, set);
    const fs::path dir = prepare_dir(o.out);
    ojson r = report_header("analyze");
    r["input"] = o.input;
    r["analyze"] = stage_analyze(set, p, o, build_models(set, p), dir);
    write_json(dir / "report.json", r);
    return 0;
}

int cmd_stability(const Options& o) {
    const ShotSet set = load_blinded(o);
    const AnalysisParams p = resolve_params(o, set);
    const fs::path dir = prepare_dir(o.out);
    const StabilityResult st = stability_analysis(set, p, stability_options(o));
    write_stability_csv(dir / "stability.csv", st);
    ojson r = report_header("stability");
    r["input"] = o.input;
    r["params"] = params_json(p);
    r["stability"] = stability_json(st, o);
    r["stability"]["file"] = "stability.csv";
    write_json(dir / "report.json", r);
    std::cout << "stability: " << o.subsets << " subsets x " << o.reps << " reps\n";
    return 0;
}

int cmd_consistency(const Options& o) {
    const ShotSet set = load_blinded(o);
    const AnalysisParams p = resolve_params(o, set);
    const fs::path dir = prepare_dir(o.out);
    ConsistencyOptions copt;
    copt.stability = stability_options(o);
    copt.window = Roi{std::max(kMinRankingStartNs, set.axis().t0_ns),
                      std::min(100.0, set.axis().end_ns())};
    const ConsistencyReport rep = consistency_tests(set, p, copt);

    std::vector<Curve> curves;
    const auto& cc = rep.stability.full_run.class_curves;
    for (std::size_t c = 0; c < cc.size(); ++c)
        curves.push_back(Curve{class_name(c), cc[c].mean,
                               combined_band(cc[c].sigma, rep.stability.std_band[c])});
    export_curves(curves, (dir / "consistency_curves.csv").string());

    ojson pairs = ojson::array();
    for (const auto& v : rep.pairs)
        pairs.push_back({{"a", v.a},
                         {"b", v.b},
                         {"fraction_within", v.agreement.fraction_within},
                         {"scale", v.agreement.scale},
                         {"bins", v.agreement.bins},
                         {"agree", v.agree}});
    ojson r = report_header("consistency");
    r["input"] = o.input;
    r["params"] = params_json(p);
    r["consistency"] = {{"k", rep.k},
                        {"z", copt.z},
                        {"agree_fraction", copt.agree_fraction},
                        {"window_ns", roi_json(copt.window)},
                        {"pairs", pairs},
                        {"agreeing_pairs", rep.agreeing_pairs},
                        {"verdict", rep.verdict},
                        {"stability", stability_json(rep.stability, o)},
                        {"file", "consistency_curves.csv"}};
    write_json(dir / "report.json", r);
    std::cout << "consistency: k=" << rep.k << " " << rep.agreeing_pairs << "/" << rep.pairs.size()
              << " pairs agree, verdict " << rep.verdict << "\n";
    return 0;
}

int cmd_calibrate(const Options& o) {
    const ShotSet set = load_blinded(o);
    const fs::path dir = prepare_dir(o.out);
    std::vector<std::size_t> all(set.n_shots());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Trace average = cluster_model(set, all);

    double fwhm = o.fwhm_ns;
    if (fwhm <= 0.0) {
        fwhm = 2.5;
        if (auto it = set.meta().find("kernel_fwhm_ns"); it != set.meta().end()) {
            try {
                fwhm = std::stod(it->second);
            } catch (const std::exception&) {
                throw FormatError(o.input, "meta kernel_fwhm_ns is not a number");
            }
        }
    }
    const DetectorKernel kernel = detector_kernel(fwhm, set.axis().dt_ns, 1.0);
    const Roi full = default_ranking_window(set.axis());
    const Roi tail{std::max(o.tail_start_ns, set.axis().t0_ns), set.axis().end_ns()};
    const PhotonCalibration cal =
        calibrate_photon_number(average, kernel, o.n_values, o.sims, tail, full, o.seed);
    write_calibration_csv(cal, (dir / "calibration.csv").string());

    std::ostringstream csv;
    csv << "shot,content,n_est,n_sigma\n";
    std::size_t in_range = 0;
    for (std::size_t i = 0; i < set.n_shots(); ++i) {
        const double content = signal_content(set.row(i), set.axis(), full.bins(set.axis()));
        csv << i << ',' << format_number(content) << ',';
        try {
            const PhotonEstimate e = estimate_photons(content, cal);
            csv << format_number(e.n_est) << ',' << format_number(e.n_sigma) << '\n';
            ++in_range;
        } catch (const OutOfRange&) {
            csv << ",\n";
        }
    }
    write_text(dir / "photon_estimates.csv", csv.str());

    ojson entries = ojson::array();
    for (const auto& e : cal.entries)
        entries.push_back({{"n_photons", e.n_photons},
                           {"content_mean", e.content_mean},
                           {"content_std", e.content_std}});
    ojson r = report_header("calibrate");
    r["input"] = o.input;
    r["calibrate"] = {{"kernel_fwhm_ns", fwhm},
                      {"n_sims", o.sims},
                      {"seed", o.seed},
                      {"tail_window_ns", roi_json(tail)},
                      {"full_window_ns", roi_json(full)},
                      {"entries", entries},
                      {"shots_in_range", in_range},
                      {"files", {{"calibration", "calibration.csv"},
                                 {"photon_estimates", "photon_estimates.csv"}}}};
    write_json(dir / "report.json", r);
    std::cout << "calibrate: " << cal.entries.size() << " photon numbers, " << in_range << "/"
              << set.n_shots() << " shots within the calibrated range\n";
    return 0;
}

int cmd_pipeline(const Options& o) {
    const ShotSet set = load_blinded(o);
    const fs::path dir = prepare_dir(o.out);
    ojson r = report_header("pipeline");
    r["input"] = o.input;
    r["rank"] = stage_rank(set, dir);
    AnalysisParams p;
    r["optimize"] = stage_optimize(set, o, dir, p);
    r["params"] = params_json(p);
    SortResult res;
    r["sort"] = stage_sort(set, p, dir, res);
    r["analyze"] = stage_analyze(set, p, o, res.models, dir);
    write_json(dir / "report.json", r);
    return 0;
}

std::vector<std::size_t> read_assignment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line.rfind("shot,class", 0) != 0)
        throw FormatError(path, "expected header 'shot,class'");
    std::vector<std::size_t> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t shot = 0, cls = 0;
        char comma = 0;
        std::istringstream ls(line);
        if (!(ls >> shot >> comma >> cls) || comma != ',' || shot != out.size())
            throw FormatError(path, "bad assignment row at line " + std::to_string(lineno));
        out.push_back(cls);
    }
    return out;
}

std::vector<double> read_truth_photons(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line.rfind("shot,label,n_photons", 0) != 0)
        throw FormatError(path, "expected header 'shot,label,n_photons'");
    std::vector<double> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t shot = 0;
        int label = 0;
        double n = 0;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> shot >> c1 >> label >> c2 >> n) || c1 != ',' || c2 != ',' || shot != out.size())
            throw FormatError(path, "bad truth row at line " + std::to_string(lineno));
        out.push_back(n);
    }
    return out;
}

int cmd_evaluate(const Options& o) {
    if (o.input.empty()) throw UsageError("--input is required");
    if (o.assignment.empty()) throw UsageError("--assignment is required");
    const ShotSet set = read_bundle(o.input);
    if (!set.labels()) throw FormatError(o.input, "bundle carries no labels to evaluate against");
    const fs::path dir = prepare_dir(o.out);
    const auto assignment = read_assignment(o.assignment);
    if (assignment.size() != set.n_shots())
        throw FormatError(o.assignment, "has " + std::to_string(assignment.size()) +
                                            " rows for " + std::to_string(set.n_shots()) + " shots");
    std::vector<double> photons;
    std::string photon_source;
    if (!o.truth.empty()) {
        photons = read_truth_photons(o.truth);
        if (photons.size() != set.n_shots())
            throw FormatError(o.truth, "row count differs from the shot count");
        photon_source = "truth";
    } else {
        photons = integrated_photons(set);
        photon_source = "integrated";
    }
    const auto edges = default_photon_edges();
    const LabelEvaluation ev = evaluate_against_labels(set, assignment, photons, edges);

    ojson bins = ojson::array();
    for (const auto& b : ev.photon_bins) {
        ojson jb;
        jb["lo"] = b.lo;
        jb["hi"] = std::isinf(b.hi) ? ojson(nullptr) : ojson(b.hi);
        jb["n"] = b.n;
        jb["correct"] = b.correct;
        jb["accuracy"] = b.n ? ojson(b.accuracy) : ojson(nullptr);
        bins.push_back(jb);
    }
    const double above50 = accuracy_above(ev, assignment, *set.labels(), photons, 50.0);
    ojson r = report_header("evaluate");
    r["input"] = o.input;
    r["assignment"] = o.assignment;
    r["evaluate"] = {{"n_shots", ev.n_shots},
                     {"accuracy", ev.accuracy},
                     {"accuracy_photons_ge_50", std::isnan(above50) ? ojson(nullptr) : ojson(above50)},
                     {"photon_source", photon_source},
                     {"mapping", ev.mapping},
                     {"confusion", ev.confusion},
                     {"photon_bins", bins}};
    write_json(dir / "evaluation.json", r);
    std::cout << "evaluate: accuracy " << format_number(ev.accuracy) << "\n";
    return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Sort detector shots into dynamics classes", "shotsort"};
    app.require_subcommand(1);
    Options o;

    auto add_io = [&](CLI::App* sc) {
        sc->add_option("--input", o.input, "Input shot bundle");
        sc->add_option("--out", o.out, "Output directory");
        sc->add_option("--threads", o.threads, "Worker thread cap (0 = auto)");
    };
    auto add_params = [&](CLI::App* sc) {
        sc->add_option("--params", o.params, "params.json from optimize");
        sc->add_option("--n-hs", o.n_hs, "Number of highest-content shots")->delimiter(',');
        sc->add_option("--roi", o.roi, "ROI start,end in ns")->delimiter(',')->expected(2);
        sc->add_option("--k", o.k, "Number of classes")->check(CLI::PositiveNumber);
        sc->add_option("--model-floor", o.model_floor, "Model floor (counts per bin)")
            ->check(CLI::PositiveNumber);
    };
    auto add_stability = [&](CLI::App* sc) {
        sc->add_option("--subsets", o.subsets, "Subsets per repetition")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sc->add_option("--reps", o.reps, "Repetitions")->check(CLI::PositiveNumber)->capture_default_str();
        sc->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    };
    auto add_optimize = [&](CLI::App* sc) {
        sc->add_option("--n-hs", o.n_hs, "Candidate n_hs list, comma separated")->delimiter(',');
        sc->add_option("--k", o.k, "Number of clusters")->check(CLI::Range(2, 64))->capture_default_str();
        sc->add_option("--roi-step-ns", o.roi_step_ns, "ROI grid step")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sc->add_option("--sigma-ns", o.sigma_ns, "Quality map smoothing width")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        sc->add_option("--model-floor", o.model_floor, "Model floor (counts per bin)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sc->add_option("--k-max", o.k_max, "Largest cluster count scanned by analyze");
        sc->add_option("--roi-min-start-ns", o.roi_min_start_ns, "Earliest ROI start")
            ->capture_default_str();
    };

    auto* sim = app.add_subcommand("simulate", "Generate a labelled synthetic bundle");
    sim->add_option("--config", o.config, "Simulation config JSON (default scenario if absent)");
    sim->add_option("--out", o.out, "Output bundle path")->required();
    sim->add_option("--seed", o.seed, "Override the config seed");
    sim->add_option("--threads", o.threads, "Worker thread cap (0 = auto)");

    auto* rank = app.add_subcommand("rank", "Rank shots by signal content");
    add_io(rank);

    auto* opt = app.add_subcommand("optimize", "Scan n_hs and ROI for the best clustering quality");
    add_io(opt);
    add_optimize(opt);

    auto* sorting = app.add_subcommand("sort", "Build models and sort every shot");
    add_io(sorting);
    add_params(sorting);

    auto* analyze = app.add_subcommand("analyze", "Silhouette scores and cluster count selection");
    add_io(analyze);
    add_params(analyze);
    analyze->add_option("--k-max", o.k_max, "Largest cluster count scanned");

    auto* stab = app.add_subcommand("stability", "Resampling stability of the class curves");
    add_io(stab);
    add_params(stab);
    add_stability(stab);

    auto* cons = app.add_subcommand("consistency", "Pairwise agreement of recovered class curves");
    add_io(cons);
    add_params(cons);
    add_stability(cons);

    auto* cal = app.add_subcommand("calibrate", "Photon-number calibration of signal content");
    add_io(cal);
    cal->add_option("--n-values", o.n_values, "Photon numbers, comma separated")->delimiter(',');
    cal->add_option("--sims", o.sims, "Simulations per photon number")->capture_default_str();
    cal->add_option("--fwhm-ns", o.fwhm_ns, "Detector FWHM (default: bundle meta, else 2.5)");
    cal->add_option("--tail-start-ns", o.tail_start_ns, "Tail window start")->capture_default_str();
    cal->add_option("--seed", o.seed, "Random seed")->capture_default_str();

    auto* pipe = app.add_subcommand("pipeline", "rank -> optimize -> sort -> analyze");
    add_io(pipe);
    add_optimize(pipe);

    auto* eval = app.add_subcommand("evaluate", "Score an assignment against bundle labels");
    add_io(eval);
    eval->add_option("--assignment", o.assignment, "assignment.csv from sort")->required();
    eval->add_option("--truth", o.truth, "truth.csv from simulate, for true photon binning");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    auto given = [](CLI::App* sc, const std::string& name) {
        const auto* opt_ptr = sc->get_option_no_throw(name);
        return opt_ptr != nullptr && opt_ptr->count() > 0;
    };
    CLI::App* sc = app.get_subcommands().front();
    o.k_given = given(sc, "--k");
    o.seed_given = given(sc, "--seed");
    o.floor_given = given(sc, "--model-floor");
    parallel::set_max_threads(o.threads);

    try {
        const std::string name = sc->get_name();
        if (name == "simulate") return cmd_simulate(o);
        if (name == "rank") return cmd_rank(o);
        if (name == "optimize") return cmd_optimize(o);
        if (name == "sort") return cmd_sort(o);
        if (name == "analyze") return cmd_analyze(o);
        if (name == "stability") return cmd_stability(o);
        if (name == "consistency") return cmd_consistency(o);
        if (name == "calibrate") return cmd_calibrate(o);
        if (name == "pipeline") return cmd_pipeline(o);
        if (name == "evaluate") return cmd_evaluate(o);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << sc->help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"shotsort"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace shotsort::cli
