#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

#include "shotsort/cli.hpp"
#include "shotsort/dataset_io.hpp"

using namespace shotsort;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Captured {
    int code = 0;
    std::string out;
    std::string err;
};

Captured run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    Captured c;
    c.code = cli::run(args);
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    c.out = out.str();
    c.err = err.str();
    return c;
}

// One small simulated bundle shared by every case in this file.
struct Workspace {
    fs::path root;
    std::string bundle;

    Workspace() {
        root = fs::temp_directory_path() / ("shotsort_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        const std::string config = (root / "sim.json").string();
        std::ofstream(config) << R"({"axis": {"t0_ns": 0, "dt_ns": 0.5, "n_samples": 80},
                                     "n_shots": 300, "mean_photons": 40, "rng_seed": 5})";
        bundle = (root / "data" / "shots.bin").string();
        const auto r = run_cli({"simulate", "--config", config, "--out", bundle});
        REQUIRE(r.code == 0);
    }
    ~Workspace() { fs::remove_all(root); }
};

Workspace& workspace() {
    static Workspace ws;
    return ws;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

const std::vector<std::string> kOptimizeFlags{"--n-hs", "10,20", "--k-max", "3"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

} // namespace

TEST_CASE("simulate writes a labelled bundle and truth table") {
    auto& ws = workspace();
    const ShotSet set = read_bundle(ws.bundle);
    CHECK(set.n_shots() == 300);
    CHECK(set.n_samples() == 80);
    CHECK(set.labels().has_value());
    CHECK(set.meta().at("rng_seed") == "5");
    const std::string truth = slurp(ws.bundle + ".truth.csv");
    CHECK(truth.rfind("shot,label,n_photons\n", 0) == 0);
    CHECK(std::count(truth.begin(), truth.end(), '\n') == 301);
}

TEST_CASE("exit codes") {
    auto& ws = workspace();
    const std::string missing = (ws.root / "nope.bin").string();
    const auto r = run_cli({"rank", "--input", missing, "--out", (ws.root / "x").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find(missing) != std::string::npos);

    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"rank", "--bogus"}).code == 2);
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"sort", "--input", ws.bundle, "--out", (ws.root / "y").string()}).code == 2);
    CHECK(run_cli({"optimize", "--input", ws.bundle, "--out", (ws.root / "z").string(), "--k", "1"})
              .code == 2);
}

TEST_CASE("pipeline equals the separate stages and is reproducible") {
    auto& ws = workspace();
    const fs::path pipe = ws.root / "pipe";
    const fs::path pipe2 = ws.root / "pipe2";
    const fs::path staged = ws.root / "staged";
    const auto io = [&](const fs::path& out) {
        return std::vector<std::string>{"--input", ws.bundle, "--out", out.string()};
    };

    REQUIRE(run_cli(with(with({"pipeline"}, io(pipe)), kOptimizeFlags)).code == 0);
    REQUIRE(run_cli(with(with({"pipeline"}, io(pipe2)), kOptimizeFlags)).code == 0);
    REQUIRE(run_cli(with({"rank"}, io(staged))).code == 0);
    REQUIRE(run_cli(with(with({"optimize"}, io(staged)), kOptimizeFlags)).code == 0);
    const std::string params = (staged / "params.json").string();
    REQUIRE(run_cli(with(with({"sort"}, io(staged)), {"--params", params})).code == 0);
    REQUIRE(run_cli(with(with({"analyze"}, io(staged)), {"--params", params, "--k-max", "3"})).code == 0);

    const nlohmann::json report = read_json(pipe / "report.json");
    CHECK(report["schema_version"] == 1);
    CHECK(report["command"] == "pipeline");
    CHECK(report.contains("generated_at"));

    for (const char* name :
         {"ranking.csv", "params.json", "quality_nhs10.csv", "quality_raw_nhs20.csv", "assignment.csv",
          "class_curves.csv", "models.csv", "silhouette.csv", "cluster_count.csv"}) {
        CAPTURE(name);
        const std::string a = slurp(pipe / name);
        CHECK(!a.empty());
        CHECK(a == slurp(staged / name));
        CHECK(a == slurp(pipe2 / name));
    }
    nlohmann::json r1 = report, r2 = read_json(pipe2 / "report.json");
    r1.erase("generated_at");
    r2.erase("generated_at");
    CHECK(r1 == r2);

    const auto ev = run_cli({"evaluate", "--input", ws.bundle, "--out", (ws.root / "eval").string(),
                             "--assignment", (pipe / "assignment.csv").string(), "--truth",
                             ws.bundle + ".truth.csv"});
    REQUIRE(ev.code == 0);
    const nlohmann::json e = read_json(ws.root / "eval" / "evaluation.json");
    CHECK(e["evaluate"]["accuracy"].get<double>() >= 0.5);
    CHECK(e["evaluate"]["accuracy"].get<double>() <= 1.0);
}

TEST_CASE("stability, consistency and calibration commands") {
    auto& ws = workspace();
    const fs::path out = ws.root / "more";
    const std::vector<std::string> p{"--input", ws.bundle, "--out", out.string(),
                                     "--n-hs", "20", "--roi", "3,8"};
    REQUIRE(run_cli(with(with({"stability"}, p), {"--subsets", "2", "--reps", "2"})).code == 0);
    CHECK(fs::exists(out / "stability.csv"));
    REQUIRE(run_cli(with(with({"consistency"}, p), {"--subsets", "2", "--reps", "2"})).code == 0);
    const nlohmann::json c = read_json(out / "report.json");
    CHECK(c["command"] == "consistency");
    CHECK(fs::exists(out / "consistency_curves.csv"));

    REQUIRE(run_cli({"calibrate", "--input", ws.bundle, "--out", out.string(), "--n-values",
                     "1,5,20,60", "--sims", "100"})
                .code == 0);
    CHECK(slurp(out / "calibration.csv").rfind("N,content_mean,content_std", 0) == 0);
    CHECK(fs::exists(out / "photon_estimates.csv"));
}
