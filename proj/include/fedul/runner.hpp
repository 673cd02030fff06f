// runner.hpp - config-driven benchmark orchestration and reporting
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedul/dataset.hpp"
#include "fedul/fedsim.hpp"
#include "fedul/metrics.hpp"
#include "fedul/model.hpp"
#include "fedul/split.hpp"
#include "fedul/synth.hpp"
#include "fedul/table.hpp"
#include "fedul/unlearn.hpp"

namespace fedul::runner {

namespace fs = std::filesystem;
using nlohmann::json;

inline const std::vector<std::string> kDatasetIds = {"bl", "db", "gc", "ad", "hd", "pr"};

struct ScenarioCfg {
    enum class Kind { feature, rows };
    Kind kind = Kind::feature;
    std::optional<std::string> feature; // unset -> dataset's first feature
    std::vector<double> rates;          // rows scenario; subset of {0.05, 0.1, 0.2}

    bool operator==(const ScenarioCfg&) const = default;
};

struct UnlearnCfg {
    std::optional<std::size_t> budget_rounds; // unset -> same budget as training
    double lr_scale = 0.1;                    // grad_diff / kl_min learning-rate scale
    // Pure gradient ascent is deliberately left ungoverned; FedAvg averaging
    // and small per-client forget views damp it heavily, so reproducing the
    // catastrophic-forgetting behaviour needs a much larger step.
    double ascent_lr_scale = 6.0;
    double kl_weight = 1.0;

    bool operator==(const UnlearnCfg&) const = default;
};

struct ExperimentConfig {
    std::string dataset;
    std::string dataset_dir = "data";
    ScenarioCfg scenario;
    std::vector<unlearn::Algorithm> algorithms;
    model::ModelSpec model;
    fedsim::FedConfig fed;
    std::size_t n_clients = 5;
    double test_fraction = 0.2;
    std::size_t n_repeats = 10;
    std::uint64_t base_seed = 1;
    std::string out_dir = "out";
    UnlearnCfg unlearn_cfg;
    double convergence_epsilon = 0.02;
    std::size_t convergence_patience = 5;
    std::size_t synth_rows = 2000; // pr stand-in size

    bool operator==(const ExperimentConfig&) const = default;

    std::size_t budget_rounds() const {
        return unlearn_cfg.budget_rounds.value_or(fed.n_rounds);
    }

    void validate() const {
        if (std::find(kDatasetIds.begin(), kDatasetIds.end(), dataset) == kDatasetIds.end())
            throw std::runtime_error("config: unknown dataset id '" + dataset + "'");
        if (algorithms.empty()) throw std::runtime_error("config: no algorithms listed");
        std::set<std::string> seen;
        for (auto a : algorithms) {
            if (!seen.insert(unlearn::algorithm_name(a)).second)
                throw std::runtime_error("config: duplicate algorithm");
            const bool ok = scenario.kind == ScenarioCfg::Kind::feature
                                ? (a == unlearn::Algorithm::retrain || a == unlearn::Algorithm::finetune)
                                : (a != unlearn::Algorithm::finetune);
            if (!ok)
                throw std::runtime_error(std::string("config: algorithm '") +
                                         unlearn::algorithm_name(a) +
                                         "' cannot pair with this scenario");
        }
        if (scenario.kind == ScenarioCfg::Kind::rows) {
            if (scenario.rates.empty()) throw std::runtime_error("config: rows scenario needs rates");
            for (double r : scenario.rates)
                if (r != 0.05 && r != 0.1 && r != 0.2)
                    throw std::runtime_error("config: rate must be one of 0.05, 0.1, 0.2");
        }
        if (n_repeats < 1) throw std::runtime_error("config: n_repeats must be >= 1");
        if (n_clients < 1) throw std::runtime_error("config: n_clients must be >= 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw std::runtime_error("config: test_fraction must be in (0,1)");
        if (fed.n_rounds < 1) throw std::runtime_error("config: n_rounds must be >= 1");
        fed.validate();
        if (!(unlearn_cfg.lr_scale > 0.0)) throw std::runtime_error("config: lr_scale must be > 0");
        if (!(unlearn_cfg.ascent_lr_scale > 0.0))
            throw std::runtime_error("config: ascent_lr_scale must be > 0");
        if (unlearn_cfg.kl_weight < 0.0) throw std::runtime_error("config: kl_weight must be >= 0");
        if (!(convergence_epsilon > 0.0) || convergence_patience < 1)
            throw std::runtime_error("config: bad convergence settings");
        if (synth_rows < 100) throw std::runtime_error("config: synth_rows must be >= 100");
    }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok)
            throw std::runtime_error(std::string("config: unknown key '") + it.key() + "' in " +
                                     where);
    }
}

inline std::string sanitize(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '-';
    return s;
}

inline std::string format_rate(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", r);
    return buf;
}

} // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    detail::check_keys(j,
                       {"dataset", "dataset_dir", "scenario", "algorithms", "model", "fed",
                        "n_clients", "test_fraction", "n_repeats", "base_seed", "out_dir",
                        "unlearn", "convergence_epsilon", "convergence_patience", "synth_rows"},
                       "config");
    cfg.dataset = j.at("dataset").get<std::string>();
    if (j.contains("dataset_dir")) cfg.dataset_dir = j.at("dataset_dir").get<std::string>();

    const json& js = j.at("scenario");
    detail::check_keys(js, {"kind", "feature", "rate", "rates"}, "scenario");
    const std::string kind = js.at("kind").get<std::string>();
    if (kind == "feature") {
        cfg.scenario.kind = ScenarioCfg::Kind::feature;
        if (js.contains("feature")) cfg.scenario.feature = js.at("feature").get<std::string>();
    } else if (kind == "rows") {
        cfg.scenario.kind = ScenarioCfg::Kind::rows;
        if (js.contains("rate")) cfg.scenario.rates.push_back(js.at("rate").get<double>());
        if (js.contains("rates"))
            for (const auto& r : js.at("rates")) cfg.scenario.rates.push_back(r.get<double>());
    } else {
        throw std::runtime_error("config: scenario kind must be 'feature' or 'rows'");
    }

    for (const auto& a : j.at("algorithms"))
        cfg.algorithms.push_back(unlearn::algorithm_from_name(a.get<std::string>()));

    if (j.contains("model")) {
        const json& jm = j.at("model");
        detail::check_keys(jm, {"kind", "hidden_dim", "init_seed", "init_scale"}, "model");
        if (jm.contains("kind")) {
            const std::string mk = jm.at("kind").get<std::string>();
            if (mk == "logistic")
                cfg.model.kind = model::ModelKind::logistic;
            else if (mk == "mlp")
                cfg.model.kind = model::ModelKind::mlp;
            else
                throw std::runtime_error("config: model kind must be 'logistic' or 'mlp'");
        }
        if (jm.contains("hidden_dim")) cfg.model.hidden_dim = jm.at("hidden_dim").get<std::size_t>();
        if (jm.contains("init_seed")) cfg.model.init_seed = jm.at("init_seed").get<std::uint64_t>();
        if (jm.contains("init_scale")) cfg.model.init_scale = jm.at("init_scale").get<double>();
    }

    cfg.fed.learning_rate = cfg.model.kind == model::ModelKind::logistic ? 0.05 : 0.01;
    if (j.contains("fed")) {
        const json& jf = j.at("fed");
        detail::check_keys(jf, {"n_rounds", "local_epochs", "batch_size", "learning_rate"}, "fed");
        if (jf.contains("n_rounds")) cfg.fed.n_rounds = jf.at("n_rounds").get<std::size_t>();
        if (jf.contains("local_epochs"))
            cfg.fed.local_epochs = jf.at("local_epochs").get<std::size_t>();
        if (jf.contains("batch_size")) cfg.fed.batch_size = jf.at("batch_size").get<std::size_t>();
        if (jf.contains("learning_rate"))
            cfg.fed.learning_rate = jf.at("learning_rate").get<double>();
    }

    if (j.contains("n_clients")) cfg.n_clients = j.at("n_clients").get<std::size_t>();
    if (j.contains("test_fraction")) cfg.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("n_repeats")) cfg.n_repeats = j.at("n_repeats").get<std::size_t>();
    if (j.contains("base_seed")) cfg.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();

    if (j.contains("unlearn")) {
        const json& ju = j.at("unlearn");
        detail::check_keys(ju, {"budget_rounds", "lr_scale", "ascent_lr_scale", "kl_weight"},
                           "unlearn");
        if (ju.contains("budget_rounds"))
            cfg.unlearn_cfg.budget_rounds = ju.at("budget_rounds").get<std::size_t>();
        if (ju.contains("lr_scale")) cfg.unlearn_cfg.lr_scale = ju.at("lr_scale").get<double>();
        if (ju.contains("ascent_lr_scale"))
            cfg.unlearn_cfg.ascent_lr_scale = ju.at("ascent_lr_scale").get<double>();
        if (ju.contains("kl_weight")) cfg.unlearn_cfg.kl_weight = ju.at("kl_weight").get<double>();
    }
    if (j.contains("convergence_epsilon"))
        cfg.convergence_epsilon = j.at("convergence_epsilon").get<double>();
    if (j.contains("convergence_patience"))
        cfg.convergence_patience = j.at("convergence_patience").get<std::size_t>();
    if (j.contains("synth_rows")) cfg.synth_rows = j.at("synth_rows").get<std::size_t>();

    cfg.validate();
    return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["dataset"] = cfg.dataset;
    j["dataset_dir"] = cfg.dataset_dir;
    json js;
    if (cfg.scenario.kind == ScenarioCfg::Kind::feature) {
        js["kind"] = "feature";
        if (cfg.scenario.feature) js["feature"] = *cfg.scenario.feature;
    } else {
        js["kind"] = "rows";
        js["rates"] = cfg.scenario.rates;
    }
    j["scenario"] = js;
    j["algorithms"] = json::array();
    for (auto a : cfg.algorithms) j["algorithms"].push_back(unlearn::algorithm_name(a));
    j["model"] = {{"kind", cfg.model.kind == model::ModelKind::logistic ? "logistic" : "mlp"},
                  {"hidden_dim", cfg.model.hidden_dim},
                  {"init_seed", cfg.model.init_seed},
                  {"init_scale", cfg.model.init_scale}};
    j["fed"] = {{"n_rounds", cfg.fed.n_rounds},
                {"local_epochs", cfg.fed.local_epochs},
                {"batch_size", cfg.fed.batch_size},
                {"learning_rate", cfg.fed.learning_rate}};
    j["n_clients"] = cfg.n_clients;
    j["test_fraction"] = cfg.test_fraction;
    j["n_repeats"] = cfg.n_repeats;
    j["base_seed"] = cfg.base_seed;
    j["out_dir"] = cfg.out_dir;
    json ju;
    if (cfg.unlearn_cfg.budget_rounds) ju["budget_rounds"] = *cfg.unlearn_cfg.budget_rounds;
    ju["lr_scale"] = cfg.unlearn_cfg.lr_scale;
    ju["ascent_lr_scale"] = cfg.unlearn_cfg.ascent_lr_scale;
    ju["kl_weight"] = cfg.unlearn_cfg.kl_weight;
    j["unlearn"] = ju;
    j["convergence_epsilon"] = cfg.convergence_epsilon;
    j["convergence_patience"] = cfg.convergence_patience;
    j["synth_rows"] = cfg.synth_rows;
    return j;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("malformed config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << config_to_json(cfg).dump(2) << '\n';
}

/// Digest over the science-relevant part of a config (paths excluded), used
/// to tie persisted runs back to the configuration that produced them.
inline std::string config_digest(const ExperimentConfig& cfg) {
    json j = config_to_json(cfg);
    j.erase("out_dir");
    j.erase("dataset_dir");
    const std::string canon = j.dump();
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon)));
    return buf;
}

// ---------------------------------------------------------------------------
// per-run records

struct RunMetrics {
    std::string dataset;
    std::string scenario_kind; // "feature" | "rows"
    std::string feature;       // feature scenario target
    double rate = 0.0;         // rows scenario rate
    std::string algorithm;     // includes the pseudo-algorithm "train"
    std::uint64_t seed = 0;
    double f1 = 0.0, tpr = 0.0, ppv = 0.0;
    std::optional<double> residual;
    std::string eval_set_kind; // "full_data" | "forget_set"
    std::size_t rounds_to_convergence = 0;
    std::size_t budget_rounds = 0;
};

inline std::string cell_id(const RunMetrics& m) {
    std::string scen = m.scenario_kind == "feature" ? "f-" + detail::sanitize(m.feature)
                                                    : "r" + detail::format_rate(m.rate);
    return m.dataset + "_" + scen + "_" + m.algorithm;
}

inline std::string run_id(const RunMetrics& m) {
    return cell_id(m) + "_s" + std::to_string(m.seed);
}

inline json run_metrics_to_json(const RunMetrics& m) {
    json j;
    j["dataset"] = m.dataset;
    json js;
    js["kind"] = m.scenario_kind;
    if (m.scenario_kind == "feature")
        js["feature"] = m.feature;
    else
        js["rate"] = m.rate;
    j["scenario"] = js;
    j["algorithm"] = m.algorithm;
    j["seed"] = m.seed;
    j["fidelity"] = {{"f1", m.f1}, {"tpr", m.tpr}, {"ppv", m.ppv}};
    if (m.residual)
        j["residual"] = {{"value", *m.residual}, {"eval_set", m.eval_set_kind}};
    else
        j["residual"] = nullptr;
    j["rounds_to_convergence"] = m.rounds_to_convergence;
    j["budget_rounds"] = m.budget_rounds;
    return j;
}

inline RunMetrics run_metrics_from_json(const json& j) {
    RunMetrics m;
    m.dataset = j.at("dataset").get<std::string>();
    m.scenario_kind = j.at("scenario").at("kind").get<std::string>();
    if (m.scenario_kind == "feature")
        m.feature = j.at("scenario").at("feature").get<std::string>();
    else
        m.rate = j.at("scenario").at("rate").get<double>();
    m.algorithm = j.at("algorithm").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.f1 = j.at("fidelity").at("f1").get<double>();
    m.tpr = j.at("fidelity").at("tpr").get<double>();
    m.ppv = j.at("fidelity").at("ppv").get<double>();
    if (!j.at("residual").is_null()) {
        m.residual = j.at("residual").at("value").get<double>();
        m.eval_set_kind = j.at("residual").at("eval_set").get<std::string>();
    }
    m.rounds_to_convergence = j.at("rounds_to_convergence").get<std::size_t>();
    m.budget_rounds = j.at("budget_rounds").get<std::size_t>();
    return m;
}

// ---------------------------------------------------------------------------
// report rendering

/// Half-up rounding to 3 decimals, matching the "0.594 (0.040)" table style.
inline std::string fmt3(double v) {
    const double r = std::floor(v * 1000.0 + 0.5) / 1000.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r);
    return buf;
}

inline std::string summary_cell(const metrics::RunSummary& s) {
    return fmt3(s.mean) + " (" + fmt3(s.stddev) + ")";
}

enum class ReportLayout { fidelity, certifiability, rates };

namespace detail {

inline const std::vector<std::string> kAlgoOrder = {"kl_min", "grad_ascent", "grad_diff",
                                                    "finetune", "retrain", "train"};

inline std::vector<std::string> algorithms_present(const std::vector<RunMetrics>& runs,
                                                   bool include_train) {
    std::set<std::string> present;
    for (const auto& m : runs) present.insert(m.algorithm);
    std::vector<std::string> out;
    for (const auto& a : kAlgoOrder) {
        if (a == "train" && !include_train) continue;
        if (present.count(a)) out.push_back(a);
    }
    return out;
}

struct CellKey {
    std::string dataset;
    double rate;
    std::string feature;
    std::string algorithm;

    auto operator<=>(const CellKey&) const = default;
};

inline metrics::RunSummary summarize(const std::vector<RunMetrics>& runs, const CellKey& key,
                                     double RunMetrics::* field) {
    std::vector<double> vals;
    std::map<std::uint64_t, double> by_seed; // seed-sorted for determinism
    for (const auto& m : runs)
        if (m.dataset == key.dataset && m.rate == key.rate && m.feature == key.feature &&
            m.algorithm == key.algorithm)
            by_seed[m.seed] = m.*field;
    for (const auto& [seed, v] : by_seed) vals.push_back(v);
    if (vals.empty()) return {};
    return metrics::summarize_runs(vals);
}

} // namespace detail

/// Renders one report layout as markdown (returned) and, when `out_base` is
/// non-empty, writes `<out_base>.md` and a long-form `<out_base>.csv`.
inline std::string emit_report(const std::vector<RunMetrics>& runs, ReportLayout layout,
                               const std::string& out_base = "") {
    if (runs.empty()) throw std::runtime_error("emit_report: no run metrics");

    std::ostringstream md;
    std::ostringstream csv;

    struct Group {
        std::string dataset;
        double rate;
        std::string feature;
    };
    std::set<std::tuple<std::string, double, std::string>> group_set;
    for (const auto& m : runs) group_set.insert({m.dataset, m.rate, m.feature});
    std::vector<Group> groups;
    for (const auto& [d, r, f] : group_set) groups.push_back({d, r, f});

    const std::vector<std::pair<std::string, double RunMetrics::*>> fid_metrics = {
        {"F1", &RunMetrics::f1}, {"TPR", &RunMetrics::tpr}, {"PPV", &RunMetrics::ppv}};

    std::set<std::string> datasets;
    for (const auto& m : runs) datasets.insert(m.dataset);

    if (layout == ReportLayout::fidelity || layout == ReportLayout::rates) {
        const bool rates_layout = layout == ReportLayout::rates;
        const bool include_train = !rates_layout;
        const auto algos = detail::algorithms_present(runs, include_train);

        md << (rates_layout ? "# Fidelity by unlearning rate\n\n" : "# Fidelity\n\n");
        md << (rates_layout ? "| Rate | Metric |" : "| Data | Metric |");
        for (const auto& a : algos) md << ' ' << a << " |";
        md << "\n|---|---|";
        for (std::size_t i = 0; i < algos.size(); ++i) md << "---|";
        md << '\n';
        csv << (rates_layout ? "rate,metric,algorithm,mean,std,n\n"
                             : "dataset,rate,feature,metric,algorithm,mean,std,n\n");

        for (const auto& g : groups) {
            for (const auto& [mname, field] : fid_metrics) {
                // find the best (max mean) cell for markdown bolding
                double best = -1.0;
                std::vector<metrics::RunSummary> cells;
                for (const auto& a : algos) {
                    auto s = detail::summarize(runs, {g.dataset, g.rate, g.feature, a}, field);
                    if (s.n_runs > 0) best = std::max(best, s.mean);
                    cells.push_back(s);
                }
                std::string row_label;
                if (rates_layout)
                    row_label = (datasets.size() > 1 ? g.dataset + " " : "") +
                                detail::format_rate(g.rate);
                else
                    row_label = g.dataset +
                                (g.rate > 0.0 ? " r=" + detail::format_rate(g.rate) : "");
                md << "| " << row_label << " | " << mname << " |";
                for (std::size_t i = 0; i < algos.size(); ++i) {
                    const auto& s = cells[i];
                    if (s.n_runs == 0) {
                        md << " - |";
                        continue;
                    }
                    const bool bold = s.mean == best;
                    md << ' ' << (bold ? "**" : "") << summary_cell(s) << (bold ? "**" : "")
                       << " |";
                    if (rates_layout)
                        csv << detail::format_rate(g.rate) << ',' << mname << ',' << algos[i]
                            << ',' << fmt3(s.mean) << ',' << fmt3(s.stddev) << ',' << s.n_runs
                            << '\n';
                    else
                        csv << g.dataset << ',' << detail::format_rate(g.rate) << ',' << g.feature
                            << ',' << mname << ',' << algos[i] << ',' << fmt3(s.mean) << ','
                            << fmt3(s.stddev) << ',' << s.n_runs << '\n';
                }
                md << '\n';
            }
        }
    } else {
        // certifiability: one row per algorithm, one column per dataset group
        std::vector<RunMetrics> with_residual;
        for (const auto& m : runs)
            if (m.residual) with_residual.push_back(m);
        if (with_residual.empty())
            throw std::runtime_error("emit_report: no certifiability values recorded");
        const auto algos = detail::algorithms_present(with_residual, false);

        md << "# Certifiability (residual norm vs retrain)\n\n| Algorithm |";
        for (const auto& g : groups)
            md << ' ' << g.dataset
               << (g.rate > 0.0 ? " r=" + detail::format_rate(g.rate) : "") << " |";
        md << "\n|---|";
        for (std::size_t i = 0; i < groups.size(); ++i) md << "---|";
        md << '\n';
        csv << "dataset,rate,feature,algorithm,mean,std,n\n";

        for (const auto& a : algos) {
            md << "| " << a << " |";
            for (const auto& g : groups) {
                std::vector<double> vals;
                std::map<std::uint64_t, double> by_seed;
                for (const auto& m : with_residual)
                    if (m.dataset == g.dataset && m.rate == g.rate && m.feature == g.feature &&
                        m.algorithm == a)
                        by_seed[m.seed] = *m.residual;
                for (const auto& [s, v] : by_seed) vals.push_back(v);
                if (vals.empty()) {
                    md << " - |";
                    continue;
                }
                const auto s = metrics::summarize_runs(vals);
                md << ' ' << summary_cell(s) << " |";
                csv << g.dataset << ',' << detail::format_rate(g.rate) << ',' << g.feature << ','
                    << a << ',' << fmt3(s.mean) << ',' << fmt3(s.stddev) << ',' << s.n_runs
                    << '\n';
            }
            md << '\n';
        }
    }

    if (!out_base.empty()) {
        fs::create_directories(fs::path(out_base).parent_path());
        std::ofstream fmd(out_base + ".md");
        fmd << md.str();
        std::ofstream fcsv(out_base + ".csv");
        fcsv << csv.str();
    }
    return md.str();
}

/// Efficiency summary (mean/std rounds to convergence) as CSV.
inline void emit_efficiency(const std::vector<RunMetrics>& runs, const std::string& out_path) {
    std::set<std::tuple<std::string, double, std::string>> group_set;
    for (const auto& m : runs) group_set.insert({m.dataset, m.rate, m.feature});
    std::ofstream out(out_path);
    out << "dataset,rate,feature,algorithm,mean_rounds,std_rounds,n\n";
    for (const auto& [d, r, f] : group_set) {
        for (const auto& a : detail::algorithms_present(runs, true)) {
            std::map<std::uint64_t, double> by_seed;
            for (const auto& m : runs)
                if (m.dataset == d && m.rate == r && m.feature == f && m.algorithm == a)
                    by_seed[m.seed] = static_cast<double>(m.rounds_to_convergence);
            if (by_seed.empty()) continue;
            std::vector<double> vals;
            for (const auto& [s, v] : by_seed) vals.push_back(v);
            const auto s = metrics::summarize_runs(vals);
            out << d << ',' << detail::format_rate(r) << ',' << f << ',' << a << ',' << fmt3(s.mean)
                << ',' << fmt3(s.stddev) << ',' << s.n_runs << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// curve files

inline void write_curve_csv(const std::string& path, const fedsim::RoundHistory& history) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    out << "round,f1,tpr,ppv\n";
    char buf[96];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", r.round, r.fidelity.f1,
                      r.fidelity.tpr, r.fidelity.ppv);
        out << buf;
    }
}

/// One file per (cell, seed) plus a mean-over-seeds file per cell.
inline void emit_curves(
    const std::map<std::string, std::vector<std::pair<std::uint64_t, fedsim::RoundHistory>>>&
        by_cell,
    const std::string& dir) {
    for (const auto& [cell, seeds] : by_cell) {
        std::size_t max_rounds = 0;
        for (const auto& [seed, hist] : seeds) {
            write_curve_csv(dir + "/" + cell + "_s" + std::to_string(seed) + ".csv", hist);
            max_rounds = std::max(max_rounds, hist.size());
        }
        std::ofstream mean(dir + "/" + cell + "_mean.csv");
        mean << "round,f1,tpr,ppv\n";
        char buf[96];
        for (std::size_t r = 0; r < max_rounds; ++r) {
            double f1 = 0, tpr = 0, ppv = 0;
            std::size_t n = 0;
            for (const auto& [seed, hist] : seeds) {
                if (r >= hist.size()) continue;
                f1 += hist[r].fidelity.f1;
                tpr += hist[r].fidelity.tpr;
                ppv += hist[r].fidelity.ppv;
                ++n;
            }
            if (n == 0) continue;
            const double dn = static_cast<double>(n);
            std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", r + 1, f1 / dn, tpr / dn,
                          ppv / dn);
            mean << buf;
        }
    }
}

// ---------------------------------------------------------------------------
// dataset resolution and world construction

struct LoadedData {
    data::RawTable table;
    data::SchemaFile schema;
};

inline std::string resolve_dataset_dir(const ExperimentConfig& cfg,
                                       const std::string& cli_override) {
    if (!cli_override.empty()) return cli_override;
    if (const char* env = std::getenv("FEDUL_DATASET_DIR"); env && *env) return env;
    return cfg.dataset_dir;
}

inline LoadedData load_dataset(const ExperimentConfig& cfg, const std::string& dataset_dir) {
    if (cfg.dataset == "pr") {
        auto [table, schema] = data::synth_private(derive_seed(cfg.base_seed, "pr_synth"),
                                                   cfg.synth_rows);
        return {std::move(table), std::move(schema)};
    }
    const fs::path dir(dataset_dir);
    const fs::path csv = dir / (cfg.dataset + ".csv");
    fs::path schema_path = dir / (cfg.dataset + ".schema.json");
    if (!fs::exists(schema_path)) {
        const fs::path alt = dir / "schemas" / (cfg.dataset + ".schema.json");
        if (fs::exists(alt))
            schema_path = alt;
        else
            throw std::runtime_error("no schema descriptor for '" + cfg.dataset + "' in " +
                                     dir.string() + " (tried " + schema_path.string() + " and " +
                                     alt.string() + ")");
    }
    LoadedData ld;
    ld.schema = data::load_schema(schema_path.string());
    ld.table = data::load_table(csv.string(), ld.schema.schema);
    if (ld.table.n_rows() == 0) throw std::runtime_error("dataset file has no rows: " + csv.string());
    return ld;
}

/// Picks the unlearning target feature: explicit config value (checked
/// against the per-dataset candidate list) or the dataset's first feature.
inline std::string resolve_feature_target(const ExperimentConfig& cfg,
                                          const data::SchemaFile& schema) {
    if (cfg.scenario.feature) {
        const std::string& f = *cfg.scenario.feature;
        if (!schema.schema.find(f))
            throw std::runtime_error("config: unknown unlearning feature '" + f + "'");
        if (!schema.unlearn_candidates.empty() &&
            std::find(schema.unlearn_candidates.begin(), schema.unlearn_candidates.end(), f) ==
                schema.unlearn_candidates.end())
            throw std::runtime_error("config: feature '" + f +
                                     "' is not an unlearning candidate for this dataset");
        return f;
    }
    return schema.schema.features.front().name;
}

struct SeedPlan {
    std::uint64_t run_seed, split, clients, forget, shuffle, init;
};

inline SeedPlan seed_plan(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    SeedPlan s;
    s.run_seed = run_seed;
    s.split = derive_seed(run_seed, "split");
    s.clients = derive_seed(run_seed, "clients");
    s.forget = derive_seed(run_seed, "forget");
    s.shuffle = derive_seed(run_seed, "shuffle");
    s.init = derive_seed(run_seed, "init", cfg.model.init_seed);
    return s;
}

struct PreparedWorld {
    unlearn::World world;
    SeedPlan seeds;
    std::vector<std::string> warnings;
};

/// Builds the per-seed world: split, shard, optional forget selection, and
/// the preprocessing fit on train rows.
inline PreparedWorld prepare_world(const ExperimentConfig& cfg, const LoadedData& ld,
                                   std::uint64_t run_seed, double rate) {
    PreparedWorld pw;
    pw.seeds = seed_plan(cfg, run_seed);

    auto split = data::split_train_test(ld.table.n_rows(), ld.table.labels, cfg.test_fraction,
                                        pw.seeds.split);
    pw.warnings = split.warnings;
    pw.world.plan.train_idx = std::move(split.train_idx);
    pw.world.plan.test_idx = std::move(split.test_idx);
    pw.world.plan.seed = run_seed;
    pw.world.plan.client_assignment =
        data::partition_clients(pw.world.plan.train_idx, cfg.n_clients, pw.seeds.clients);
    if (cfg.scenario.kind == ScenarioCfg::Kind::rows)
        pw.world.plan.forget_idx =
            data::select_forget_rows(pw.world.plan.train_idx, rate, pw.seeds.forget);

    auto [ds, stats] = data::fit_transform(ld.table, ld.schema.schema, pw.world.plan.train_idx);
    for (const auto& w : stats.warnings) pw.warnings.push_back(w);
    pw.world.dataset = std::move(ds);

    pw.world.mspec = cfg.model;
    pw.world.mspec.input_dim = pw.world.dataset.n_cols();
    pw.world.mspec.init_seed = pw.seeds.init;
    return pw;
}

// ---------------------------------------------------------------------------
// the benchmark itself

struct BenchResult {
    std::vector<RunMetrics> runs;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
};

inline void persist_run(const std::string& out, const ExperimentConfig& cfg,
                        const PreparedWorld& pw, const RunMetrics& m);
inline std::vector<RunMetrics> load_runs(const std::string& out_dir);
inline void render_reports(const std::vector<RunMetrics>& runs, const std::string& out_dir);

namespace detail {

inline void write_text(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

inline std::vector<double> probs_on_rows(const model::ParamVector& p, const model::ModelSpec& spec,
                                         const data::Dataset& ds,
                                         std::span<const std::size_t> rows) {
    Matrix x(rows.size(), ds.n_cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = ds.x.row(rows[i]);
        std::copy(src.begin(), src.end(), x.row(i).begin());
    }
    return model::predict_proba(p, spec, x);
}

} // namespace detail

/// Runs the configured benchmark matrix: every (rate|feature) cell, every
/// seed, the original training plus every listed algorithm. Retrain always
/// runs (it is the certifiability baseline) even if it is not listed.
/// All artifacts land under cfg.out_dir; reports are re-rendered from the
/// persisted per-run metric files at the end.
inline BenchResult run_benchmark(const ExperimentConfig& cfg, const std::string& dataset_dir_override = "",
                                 std::ostream* log = nullptr) {
    cfg.validate();
    BenchResult result;
    const std::string out = cfg.out_dir;
    const std::string dataset_dir = resolve_dataset_dir(cfg, dataset_dir_override);

    auto note = [&](const std::string& line) {
        if (log) (*log) << line << '\n';
    };

    LoadedData ld;
    try {
        ld = load_dataset(cfg, dataset_dir);
    } catch (const std::exception& e) {
        result.errors.push_back(std::string("dataset load failed: ") + e.what());
        note("[bench] " + result.errors.back());
        json manifest;
        manifest["config"] = config_to_json(cfg);
        manifest["config_digest"] = config_digest(cfg);
        manifest["errors"] = result.errors;
        detail::write_text(out + "/manifest.json", manifest.dump(2) + "\n");
        return result;
    }

    const bool feature_scenario = cfg.scenario.kind == ScenarioCfg::Kind::feature;
    const std::string target =
        feature_scenario ? resolve_feature_target(cfg, ld.schema) : std::string();
    const std::vector<double> rates = feature_scenario ? std::vector<double>{0.0}
                                                       : cfg.scenario.rates;

    // Make sure retrain is available as the certifiability baseline.
    std::vector<unlearn::Algorithm> algos = cfg.algorithms;
    const bool retrain_listed =
        std::find(algos.begin(), algos.end(), unlearn::Algorithm::retrain) != algos.end();
    if (!retrain_listed) algos.push_back(unlearn::Algorithm::retrain);

    std::map<std::string, std::vector<std::pair<std::uint64_t, fedsim::RoundHistory>>> curves;

    for (double rate : rates) {
        for (std::size_t rep = 0; rep < cfg.n_repeats; ++rep) {
            const std::uint64_t run_seed = cfg.base_seed + rep;
            auto pw = prepare_world(cfg, ld, run_seed, rate);
            for (const auto& w : pw.warnings) result.warnings.push_back(w);
            const auto& world = pw.world;

            fedsim::FedConfig train_cfg = cfg.fed;
            train_cfg.shuffle_seed = pw.seeds.shuffle;

            // Original model, trained on everything (forget rows included).
            unlearn::Objective descend;
            auto [trained, train_hist] = fedsim::run_federated(
                unlearn::detail::make_clients(world.plan), world.dataset, world.mspec,
                model::init_params(world.mspec), descend, train_cfg, world.plan.test_idx);

            auto base_metrics = [&](const std::string& algo) {
                RunMetrics m;
                m.dataset = cfg.dataset;
                m.scenario_kind = feature_scenario ? "feature" : "rows";
                m.feature = target;
                m.rate = rate;
                m.algorithm = algo;
                m.seed = run_seed;
                return m;
            };

            {
                RunMetrics m = base_metrics("train");
                const auto fid =
                    fedsim::evaluate(trained, world.mspec, world.dataset, world.plan.test_idx);
                m.f1 = fid.f1;
                m.tpr = fid.tpr;
                m.ppv = fid.ppv;
                m.rounds_to_convergence = metrics::rounds_to_convergence(
                    train_hist, cfg.convergence_epsilon, cfg.convergence_patience);
                m.budget_rounds = cfg.fed.n_rounds;
                result.runs.push_back(m);
                curves[cell_id(m)].push_back({run_seed, train_hist});
                persist_run(out, cfg, pw, m);
            }

            // Retrain first: every other algorithm's certifiability compares
            // against it.
            unlearn::UnlearnTask retrain_task;
            retrain_task.scenario =
                feature_scenario
                    ? std::variant<unlearn::FeatureScenario, unlearn::RowsScenario>(
                          unlearn::FeatureScenario{target})
                    : std::variant<unlearn::FeatureScenario, unlearn::RowsScenario>(
                          unlearn::RowsScenario{world.plan.forget_idx, rate});
            retrain_task.algorithm = unlearn::Algorithm::retrain;
            retrain_task.budget_rounds = cfg.fed.n_rounds;
            retrain_task.seed = run_seed;

            std::vector<std::string> retrain_warnings;
            auto [retrained, retrain_hist] =
                unlearn::run_retrain(retrain_task, world, train_cfg, &retrain_warnings);
            for (const auto& w : retrain_warnings) result.warnings.push_back(w);

            // Evaluation rows for certifiability: the whole dataset for the
            // feature scenario (forget and retain sets coincide), the forget
            // rows for the rows scenario.
            std::vector<std::size_t> resid_rows;
            data::Dataset resid_ds;
            if (feature_scenario) {
                resid_ds = data::zero_feature(world.dataset, target);
                resid_rows.resize(world.dataset.n_rows());
                for (std::size_t i = 0; i < resid_rows.size(); ++i) resid_rows[i] = i;
            } else {
                resid_ds = world.dataset;
                resid_rows = world.plan.forget_idx;
            }
            const auto retrain_probs =
                detail::probs_on_rows(retrained, world.mspec, resid_ds, resid_rows);

            const data::Dataset eval_ds =
                feature_scenario ? data::zero_feature(world.dataset, target) : world.dataset;

            for (auto algo : algos) {
                model::ParamVector params;
                fedsim::RoundHistory hist;
                if (algo == unlearn::Algorithm::retrain) {
                    params = retrained;
                    hist = retrain_hist;
                } else {
                    unlearn::UnlearnTask task = retrain_task;
                    task.algorithm = algo;
                    task.budget_rounds = cfg.budget_rounds();
                    if (algo == unlearn::Algorithm::finetune) {
                        std::tie(params, hist) =
                            unlearn::run_finetune_feature(trained, task, world, train_cfg);
                    } else {
                        fedsim::FedConfig ul_cfg = train_cfg;
                        const double scale = algo == unlearn::Algorithm::grad_ascent
                                                 ? cfg.unlearn_cfg.ascent_lr_scale
                                                 : cfg.unlearn_cfg.lr_scale;
                        ul_cfg.learning_rate = train_cfg.learning_rate * scale;
                        std::tie(params, hist) = unlearn::run_unlearn_rows(
                            trained, task, world, ul_cfg, cfg.unlearn_cfg.kl_weight);
                    }
                }
                RunMetrics m = base_metrics(unlearn::algorithm_name(algo));
                const auto fid = fedsim::evaluate(params, world.mspec, eval_ds,
                                                  world.plan.test_idx);
                m.f1 = fid.f1;
                m.tpr = fid.tpr;
                m.ppv = fid.ppv;
                m.budget_rounds = hist.size();
                m.rounds_to_convergence =
                    hist.empty() ? 0
                                 : metrics::rounds_to_convergence(hist, cfg.convergence_epsilon,
                                                                  cfg.convergence_patience);
                if (algo != unlearn::Algorithm::retrain && !resid_rows.empty()) {
                    const auto probs =
                        detail::probs_on_rows(params, world.mspec, resid_ds, resid_rows);
                    const auto score = metrics::residual_norm(
                        probs, retrain_probs,
                        feature_scenario ? metrics::CertifiabilityScore::EvalSet::full_data
                                         : metrics::CertifiabilityScore::EvalSet::forget_set);
                    m.residual = score.residual_norm;
                    m.eval_set_kind = feature_scenario ? "full_data" : "forget_set";
                }
                // An implicit retrain baseline stays internal: it feeds the
                // residuals but is not reported as a configured cell.
                if (retrain_listed || algo != unlearn::Algorithm::retrain) {
                    result.runs.push_back(m);
                    curves[cell_id(m)].push_back({run_seed, hist});
                    persist_run(out, cfg, pw, m);
                }
                note("[bench] " + run_id(m) + " f1=" + fmt3(m.f1));
            }
        }
    }

    emit_curves(curves, out + "/curves");

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["config_digest"] = config_digest(cfg);
    json seeds = json::array();
    for (std::size_t rep = 0; rep < cfg.n_repeats; ++rep) seeds.push_back(cfg.base_seed + rep);
    manifest["seeds"] = seeds;
    manifest["errors"] = result.errors;
    manifest["warnings"] = result.warnings;
    detail::write_text(out + "/manifest.json", manifest.dump(2) + "\n");

    render_reports(load_runs(out), out);
    return result;
}

/// Persists one run's metrics + manifest under out/runs/<run_id>/.
inline void persist_run(const std::string& out, const ExperimentConfig& cfg,
                        const PreparedWorld& pw, const RunMetrics& m) {
    const std::string dir = out + "/runs/" + run_id(m);
    detail::write_text(dir + "/metrics.json", run_metrics_to_json(m).dump(2) + "\n");

    json manifest;
    manifest["task"] = {{"dataset", m.dataset},
                        {"scenario", m.scenario_kind},
                        {"algorithm", m.algorithm},
                        {"budget_rounds", m.budget_rounds}};
    if (m.scenario_kind == "feature")
        manifest["task"]["feature"] = m.feature;
    else
        manifest["task"]["rate"] = m.rate;
    manifest["seeds"] = {{"run", pw.seeds.run_seed},   {"split", pw.seeds.split},
                         {"clients", pw.seeds.clients}, {"forget", pw.seeds.forget},
                         {"shuffle", pw.seeds.shuffle}, {"init", pw.seeds.init}};
    manifest["config_digest"] = config_digest(cfg);
    detail::write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
}

/// Loads every persisted run under out/runs, sorted by run id.
inline std::vector<RunMetrics> load_runs(const std::string& out_dir) {
    std::vector<RunMetrics> runs;
    const fs::path runs_dir = fs::path(out_dir) / "runs";
    if (!fs::exists(runs_dir)) return runs;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(runs_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "metrics.json"))
            paths.push_back(entry.path() / "metrics.json");
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        std::ifstream in(p);
        json j;
        in >> j;
        runs.push_back(run_metrics_from_json(j));
    }
    return runs;
}

/// Re-renders every applicable report from run metrics. This is the whole
/// implementation of the `report` subcommand: reports are a pure function of
/// the persisted per-run files.
inline void render_reports(const std::vector<RunMetrics>& runs, const std::string& out_dir) {
    if (runs.empty()) throw std::runtime_error("no persisted runs under " + out_dir + "/runs");
    emit_report(runs, ReportLayout::fidelity, out_dir + "/reports/fidelity");

    bool any_residual = false;
    for (const auto& m : runs) any_residual |= m.residual.has_value();
    if (any_residual)
        emit_report(runs, ReportLayout::certifiability, out_dir + "/reports/certifiability");

    std::set<double> rates;
    for (const auto& m : runs)
        if (m.scenario_kind == "rows") rates.insert(m.rate);
    if (!rates.empty()) {
        std::vector<RunMetrics> row_runs;
        for (const auto& m : runs)
            if (m.scenario_kind == "rows" && m.algorithm != "train") row_runs.push_back(m);
        emit_report(row_runs, ReportLayout::rates, out_dir + "/reports/rates");
    }
    emit_efficiency(runs, out_dir + "/reports/efficiency.csv");
}

} // namespace fedul::runner
