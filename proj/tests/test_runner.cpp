#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedul/runner.hpp"
#include "support/fixtures.hpp"

using namespace fedul;
using namespace fedul::runner;

namespace {

namespace fs = std::filesystem;
const std::string kTmp = "runner_test_tmp";

std::string write_file(const std::string& name, const std::string& content) {
    fs::create_directories(kTmp);
    const std::string path = kTmp + "/" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig tiny_pr_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.dataset = "pr";
    cfg.scenario.kind = ScenarioCfg::Kind::rows;
    cfg.scenario.rates = {0.05};
    cfg.algorithms = {unlearn::Algorithm::grad_diff, unlearn::Algorithm::retrain};
    cfg.fed.n_rounds = 4;
    cfg.fed.learning_rate = 0.05;
    cfg.n_repeats = 2;
    cfg.base_seed = 1;
    cfg.synth_rows = 300;
    cfg.out_dir = out_dir;
    return cfg;
}

} // namespace

TEST_CASE("minimal config parses with defaults filled") {
    const auto path = write_file("minimal.json", R"({
        "dataset": "db",
        "scenario": {"kind": "rows", "rate": 0.05},
        "algorithms": ["retrain", "grad_diff"]
    })");
    const auto cfg = parse_config(path);
    CHECK(cfg.dataset == "db");
    CHECK(cfg.scenario.rates == std::vector<double>{0.05});
    CHECK(cfg.fed.learning_rate == doctest::Approx(0.05)); // logistic default
    CHECK(cfg.fed.n_rounds == 100);
    CHECK(cfg.fed.batch_size == 32);
    CHECK(cfg.n_repeats == 10);
    CHECK(cfg.n_clients == 5);
    CHECK(cfg.test_fraction == doctest::Approx(0.2));
    CHECK(cfg.unlearn_cfg.lr_scale == doctest::Approx(0.1));
}

TEST_CASE("scenario/algorithm pairing errors are rejected at parse time") {
    const auto path = write_file("pairing.json", R"({
        "dataset": "db",
        "scenario": {"kind": "feature"},
        "algorithms": ["grad_ascent"]
    })");
    CHECK_THROWS_WITH_AS(parse_config(path), doctest::Contains("cannot pair"),
                         std::runtime_error);

    const auto rows_ft = write_file("pairing2.json", R"({
        "dataset": "db",
        "scenario": {"kind": "rows", "rate": 0.05},
        "algorithms": ["finetune"]
    })");
    CHECK_THROWS(parse_config(rows_ft));
}

TEST_CASE("unknown keys, datasets and rates are rejected") {
    CHECK_THROWS_WITH_AS(parse_config(write_file("unk.json", R"({
        "dataset": "db",
        "scenario": {"kind": "rows", "rate": 0.05},
        "algorithms": ["retrain"],
        "surprise": 1
    })")),
                         doctest::Contains("unknown key"), std::runtime_error);

    CHECK_THROWS(parse_config(write_file("baddata.json", R"({
        "dataset": "mnist",
        "scenario": {"kind": "rows", "rate": 0.05},
        "algorithms": ["retrain"]
    })")));

    CHECK_THROWS(parse_config(write_file("badrate.json", R"({
        "dataset": "db",
        "scenario": {"kind": "rows", "rate": 0.15},
        "algorithms": ["retrain"]
    })")));

    CHECK_THROWS(parse_config(write_file("notjson.json", "{nope")));
}

TEST_CASE("config round-trips through serialization") {
    for (const char* body : {
             R"({"dataset": "db", "scenario": {"kind": "rows", "rates": [0.05, 0.2]},
                 "algorithms": ["kl_min", "grad_ascent", "grad_diff", "retrain"],
                 "unlearn": {"budget_rounds": 40, "lr_scale": 0.2, "kl_weight": 2.0}})",
             R"({"dataset": "pr", "scenario": {"kind": "feature", "feature": "income"},
                 "algorithms": ["finetune", "retrain"],
                 "model": {"kind": "mlp", "hidden_dim": 8},
                 "fed": {"n_rounds": 7, "learning_rate": 0.02, "batch_size": 16}})",
         }) {
        const auto path = write_file("rt.json", body);
        const auto cfg = parse_config(path);
        save_config(cfg, kTmp + "/rt_out.json");
        const auto again = parse_config(kTmp + "/rt_out.json");
        CHECK(cfg == again);
        CHECK(config_digest(cfg) == config_digest(again));
    }
}

TEST_CASE("table cells round half-up to three decimals") {
    metrics::RunSummary s;
    s.mean = 0.5946;
    s.stddev = 0.0401;
    CHECK(summary_cell(s) == "0.595 (0.040)");
    CHECK(fmt3(0.5945) == "0.595"); // half-up, not banker's
    CHECK(fmt3(0.0005) == "0.001");
    CHECK(fmt3(0.0) == "0.000");
}

TEST_CASE("fidelity report renders one row per dataset and metric") {
    std::vector<RunMetrics> runs;
    for (std::uint64_t seed : {1, 2, 3}) {
        for (const char* algo : {"finetune", "retrain", "train"}) {
            RunMetrics m;
            m.dataset = "db";
            m.scenario_kind = "feature";
            m.feature = "Pregnancies";
            m.algorithm = algo;
            m.seed = seed;
            m.f1 = 0.5 + 0.01 * seed + (algo == std::string("finetune") ? 0.05 : 0.0);
            m.tpr = 0.9;
            m.ppv = 0.4;
            m.budget_rounds = 10;
            m.rounds_to_convergence = 3;
            runs.push_back(m);
        }
    }
    const auto md = emit_report(runs, ReportLayout::fidelity, kTmp + "/rep/fidelity");
    CHECK(md.find("| db | F1 |") != std::string::npos);
    CHECK(md.find("| db | TPR |") != std::string::npos);
    CHECK(md.find("| db | PPV |") != std::string::npos);
    CHECK(md.find("finetune") != std::string::npos);
    // finetune has the best F1, so it is bolded there
    CHECK(md.find("**0.570 (0.010)**") != std::string::npos);
    CHECK(fs::exists(kTmp + "/rep/fidelity.md"));
    CHECK(fs::exists(kTmp + "/rep/fidelity.csv"));
}

TEST_CASE("certifiability report matches the one-row-per-algorithm shape") {
    std::vector<RunMetrics> runs;
    for (const char* ds : {"ad", "bl", "db"}) {
        for (std::uint64_t seed : {1, 2}) {
            RunMetrics m;
            m.dataset = ds;
            m.scenario_kind = "feature";
            m.feature = "x";
            m.algorithm = "finetune";
            m.seed = seed;
            m.f1 = 0.5;
            m.residual = 0.2 + 0.01 * seed;
            m.eval_set_kind = "full_data";
            runs.push_back(m);
        }
    }
    const auto md = emit_report(runs, ReportLayout::certifiability, "");
    CHECK(md.find("| Algorithm | ad | bl | db |") != std::string::npos);
    CHECK(md.find("| finetune |") != std::string::npos);
}

TEST_CASE("rates report populates every rate x metric x algorithm cell") {
    std::vector<RunMetrics> runs;
    const std::vector<std::string> algos = {"kl_min", "grad_ascent", "grad_diff", "retrain"};
    for (double rate : {0.05, 0.1, 0.2})
        for (const auto& algo : algos)
            for (std::uint64_t seed : {1, 2}) {
                RunMetrics m;
                m.dataset = "pr";
                m.scenario_kind = "rows";
                m.rate = rate;
                m.algorithm = algo;
                m.seed = seed;
                m.f1 = 0.4;
                m.tpr = 0.5;
                m.ppv = 0.3;
                runs.push_back(m);
            }
    const auto md = emit_report(runs, ReportLayout::rates, kTmp + "/rep/rates");
    for (const char* rate : {"| 0.05 |", "| 0.1 |", "| 0.2 |"})
        CHECK(md.find(rate) != std::string::npos);

    // csv: header + 3 rates x 3 metrics x 4 algorithms = 36 cells
    const auto csv = slurp(kTmp + "/rep/rates.csv");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 37);
}

TEST_CASE("curve files have one line per round plus a header") {
    fedsim::RoundHistory hist;
    for (std::size_t r = 1; r <= 100; ++r)
        hist.push_back({r, 0, {0.5 + 0.001 * r, 0.6, 0.4}});
    write_curve_csv(kTmp + "/curves/one.csv", hist);
    const auto text = slurp(kTmp + "/curves/one.csv");
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    CHECK(lines == 101);
    CHECK(text.rfind("round,f1,tpr,ppv\n", 0) == 0);
}

TEST_CASE("mean curve equals the mean of the per-seed curve files") {
    std::map<std::string, std::vector<std::pair<std::uint64_t, fedsim::RoundHistory>>> by_cell;
    Rng rng(51);
    for (std::uint64_t seed : {1, 2, 3}) {
        fedsim::RoundHistory hist;
        for (std::size_t r = 1; r <= 20; ++r)
            hist.push_back({r, 0, {rng.next_double(), rng.next_double(), rng.next_double()}});
        by_cell["cell"].push_back({seed, hist});
    }
    emit_curves(by_cell, kTmp + "/curves2");

    // reread the three per-seed files and recompute the mean independently
    auto parse_csv = [&](const std::string& path) {
        std::ifstream in(path);
        REQUIRE(in);
        std::string line;
        std::getline(in, line); // header
        std::vector<std::array<double, 3>> rows;
        while (std::getline(in, line)) {
            std::array<double, 3> v{};
            std::size_t round;
            REQUIRE(std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &round, &v[0], &v[1], &v[2]) ==
                    4);
            rows.push_back(v);
        }
        return rows;
    };
    const auto s1 = parse_csv(kTmp + "/curves2/cell_s1.csv");
    const auto s2 = parse_csv(kTmp + "/curves2/cell_s2.csv");
    const auto s3 = parse_csv(kTmp + "/curves2/cell_s3.csv");
    const auto mean = parse_csv(kTmp + "/curves2/cell_mean.csv");
    REQUIRE(mean.size() == 20);
    for (std::size_t r = 0; r < 20; ++r)
        for (int k = 0; k < 3; ++k)
            CHECK(mean[r][k] ==
                  doctest::Approx((s1[r][k] + s2[r][k] + s3[r][k]) / 3.0).epsilon(1e-4));
}

TEST_CASE("run_benchmark persists runs and reports and is byte-deterministic") {
    const std::string out1 = kTmp + "/bench1";
    const std::string out2 = kTmp + "/bench2";
    fs::remove_all(out1);
    fs::remove_all(out2);

    auto cfg1 = tiny_pr_config(out1);
    const auto res1 = run_benchmark(cfg1);
    CHECK(res1.errors.empty());
    // per seed: train + grad_diff + retrain
    CHECK(res1.runs.size() == 2 * 3);

    auto cfg2 = tiny_pr_config(out2);
    const auto res2 = run_benchmark(cfg2);

    for (const char* rel :
         {"/reports/fidelity.md", "/reports/fidelity.csv", "/reports/certifiability.md",
          "/reports/rates.csv", "/reports/efficiency.csv",
          "/curves/pr_r0.05_grad_diff_s1.csv", "/curves/pr_r0.05_grad_diff_mean.csv"}) {
        CHECK(slurp(out1 + rel) == slurp(out2 + rel));
    }

    // grad_diff runs carry a residual against retrain; retrain runs do not
    bool saw_residual = false;
    for (const auto& m : res1.runs) {
        if (m.algorithm == "grad_diff") {
            CHECK(m.residual.has_value());
            CHECK(m.eval_set_kind == "forget_set");
            saw_residual = true;
        }
        if (m.algorithm == "retrain") CHECK(!m.residual.has_value());
    }
    CHECK(saw_residual);
}

TEST_CASE("reports re-render identically from persisted metrics") {
    const std::string out = kTmp + "/bench1"; // written by the previous case
    REQUIRE(fs::exists(out + "/reports/fidelity.md"));
    const auto before = slurp(out + "/reports/fidelity.md");
    const auto runs = load_runs(out);
    CHECK(runs.size() == 6);
    render_reports(runs, out);
    CHECK(slurp(out + "/reports/fidelity.md") == before);
}

TEST_CASE("single-repeat summaries report zero std") {
    const std::string out = kTmp + "/bench_single";
    fs::remove_all(out);
    auto cfg = tiny_pr_config(out);
    cfg.n_repeats = 1;
    const auto res = run_benchmark(cfg);
    CHECK(res.errors.empty());
    const auto csv = slurp(out + "/reports/fidelity.csv");
    CHECK(csv.find(",1\n") != std::string::npos); // n = 1 cells present
    const auto s = metrics::summarize_runs(std::vector<double>{0.5});
    CHECK(s.stddev == 0.0);
    CHECK(!s.warnings.empty());
}

TEST_CASE("dataset load failures are recorded, not fatal") {
    const std::string out = kTmp + "/bench_fail";
    fs::remove_all(out);
    auto cfg = tiny_pr_config(out);
    cfg.dataset = "gc"; // no gc.csv anywhere near the test directory
    cfg.dataset_dir = kTmp + "/empty_dir";
    const auto res = run_benchmark(cfg);
    CHECK(res.runs.empty());
    REQUIRE(res.errors.size() == 1);
    CHECK(slurp(out + "/manifest.json").find("dataset load failed") != std::string::npos);
}

TEST_CASE("feature target resolution honours candidates") {
    const auto sf = fixtures::diabetes_schema();
    ExperimentConfig cfg;
    cfg.dataset = "db";
    cfg.scenario.kind = ScenarioCfg::Kind::feature;
    cfg.algorithms = {unlearn::Algorithm::retrain};

    CHECK(resolve_feature_target(cfg, sf) == "Pregnancies"); // first feature by default

    cfg.scenario.feature = "Glucose";
    CHECK(resolve_feature_target(cfg, sf) == "Glucose");

    cfg.scenario.feature = "BloodPressure"; // real feature, not a candidate
    CHECK_THROWS(resolve_feature_target(cfg, sf));

    cfg.scenario.feature = "nope";
    CHECK_THROWS(resolve_feature_target(cfg, sf));
}

TEST_CASE("shipped benchmark configs parse and carry the calibrated settings") {
    const std::string dir = std::string(FEDUL_SOURCE_DIR) + "/configs";

    const auto db_feature = parse_config(dir + "/db_feature.json");
    CHECK(db_feature.dataset == "db");
    CHECK(db_feature.scenario.kind == ScenarioCfg::Kind::feature);
    CHECK(db_feature.fed.n_rounds == 20);
    CHECK(db_feature.n_repeats == 10);
    CHECK(db_feature.base_seed == 1);

    const auto db_rows = parse_config(dir + "/db_rows.json");
    CHECK(db_rows.scenario.rates == std::vector<double>{0.05});
    CHECK(db_rows.fed.n_rounds == 100);
    CHECK(db_rows.algorithms.size() == 4);
    CHECK(db_rows.unlearn_cfg.lr_scale == doctest::Approx(0.1));
    CHECK(db_rows.unlearn_cfg.ascent_lr_scale == doctest::Approx(6.0));

    const auto pr_feature = parse_config(dir + "/pr_feature.json");
    CHECK(pr_feature.dataset == "pr");
    CHECK(pr_feature.fed.n_rounds == 100);

    const auto pr_rates = parse_config(dir + "/pr_rates.json");
    CHECK(pr_rates.scenario.rates == std::vector<double>{0.05, 0.1, 0.2});
    CHECK(pr_rates.algorithms.size() == 4);
}

TEST_CASE("shipped schema descriptors load and validate") {
    const std::string dir = std::string(FEDUL_SOURCE_DIR) + "/data/schemas";
    for (const char* id : {"bl", "db", "gc", "ad", "hd"}) {
        const auto sf = data::load_schema(dir + "/" + id + ".schema.json");
        CHECK(!sf.unlearn_candidates.empty());
        CHECK(sf.unlearn_candidates.size() <= 5);
        CHECK(sf.unlearn_candidates.size() >= 3);
        // the default target (first feature) is always a candidate
        CHECK(std::find(sf.unlearn_candidates.begin(), sf.unlearn_candidates.end(),
                        sf.schema.features.front().name) != sf.unlearn_candidates.end());
    }
}

TEST_CASE("dataset directory resolution prefers override, then env, then config") {
    ExperimentConfig cfg;
    cfg.dataset_dir = "from_config";
    CHECK(resolve_dataset_dir(cfg, "cli_dir") == "cli_dir");
    setenv("FEDUL_DATASET_DIR", "env_dir", 1);
    CHECK(resolve_dataset_dir(cfg, "") == "env_dir");
    unsetenv("FEDUL_DATASET_DIR");
    CHECK(resolve_dataset_dir(cfg, "") == "from_config");
}
