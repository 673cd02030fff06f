// fedul - federated unlearning benchmark CLI
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "fedul/fedul.hpp"

namespace {

using namespace fedul;

int cmd_bench(const std::string& config_path, const std::string& out_override,
              const std::string& dataset_dir, std::optional<std::uint64_t> seed) {
    auto cfg = runner::parse_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed) cfg.base_seed = *seed;
    const auto result = runner::run_benchmark(cfg, dataset_dir, &std::cerr);
    for (const auto& w : result.warnings) std::cerr << "[warn] " << w << '\n';
    if (!result.errors.empty()) {
        for (const auto& e : result.errors) std::cerr << "[error] " << e << '\n';
        return 1;
    }
    std::cout << "wrote " << result.runs.size() << " runs under " << cfg.out_dir << '\n';
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              const std::string& dataset_dir, std::optional<std::uint64_t> seed) {
    auto cfg = runner::parse_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const std::uint64_t run_seed = seed.value_or(cfg.base_seed);

    const auto ld = runner::load_dataset(cfg, runner::resolve_dataset_dir(cfg, dataset_dir));
    auto pw = runner::prepare_world(cfg, ld, run_seed, cfg.scenario.rates.empty()
                                                           ? 0.0
                                                           : cfg.scenario.rates.front());
    for (const auto& w : pw.warnings) std::cerr << "[warn] " << w << '\n';

    fedsim::FedConfig tc = cfg.fed;
    tc.shuffle_seed = pw.seeds.shuffle;
    unlearn::Objective descend;
    auto [trained, hist] = fedsim::run_federated(
        unlearn::detail::make_clients(pw.world.plan), pw.world.dataset, pw.world.mspec,
        model::init_params(pw.world.mspec), descend, tc, pw.world.plan.test_idx);

    std::filesystem::create_directories(cfg.out_dir + "/checkpoints");
    const std::string ckpt = cfg.out_dir + "/checkpoints/" + cfg.dataset + "_train_s" +
                             std::to_string(run_seed) + ".fupv";
    model::save_params(trained, ckpt);
    runner::write_curve_csv(cfg.out_dir + "/curves/" + cfg.dataset + "_train_s" +
                                std::to_string(run_seed) + ".csv",
                            hist);
    const auto fid = hist.back().fidelity;
    std::cout << "trained " << cfg.dataset << " seed " << run_seed << ": f1=" << runner::fmt3(fid.f1)
              << " tpr=" << runner::fmt3(fid.tpr) << " ppv=" << runner::fmt3(fid.ppv)
              << "\ncheckpoint: " << ckpt << '\n';
    return 0;
}

int cmd_unlearn(const std::string& config_path, const std::string& out_override,
                const std::string& dataset_dir, std::optional<std::uint64_t> seed,
                std::string algorithm_name, std::string checkpoint) {
    auto cfg = runner::parse_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const std::uint64_t run_seed = seed.value_or(cfg.base_seed);
    const auto algorithm = algorithm_name.empty()
                               ? cfg.algorithms.front()
                               : unlearn::algorithm_from_name(algorithm_name);

    const auto ld = runner::load_dataset(cfg, runner::resolve_dataset_dir(cfg, dataset_dir));
    const bool feature_scenario = cfg.scenario.kind == runner::ScenarioCfg::Kind::feature;
    const double rate = feature_scenario ? 0.0 : cfg.scenario.rates.front();
    auto pw = runner::prepare_world(cfg, ld, run_seed, rate);
    for (const auto& w : pw.warnings) std::cerr << "[warn] " << w << '\n';
    const auto& world = pw.world;

    fedsim::FedConfig tc = cfg.fed;
    tc.shuffle_seed = pw.seeds.shuffle;

    model::ParamVector trained;
    if (!checkpoint.empty()) {
        trained = model::load_params(checkpoint);
        if (trained.size() != world.mspec.param_count())
            throw std::runtime_error("checkpoint does not fit this dataset/model");
    } else {
        unlearn::Objective descend;
        std::tie(trained, std::ignore) = fedsim::run_federated(
            unlearn::detail::make_clients(world.plan), world.dataset, world.mspec,
            model::init_params(world.mspec), descend, tc, world.plan.test_idx);
    }

    unlearn::UnlearnTask task;
    if (feature_scenario)
        task.scenario = unlearn::FeatureScenario{runner::resolve_feature_target(cfg, ld.schema)};
    else
        task.scenario = unlearn::RowsScenario{world.plan.forget_idx, rate};
    task.algorithm = algorithm;
    task.budget_rounds = algorithm == unlearn::Algorithm::retrain ? cfg.fed.n_rounds
                                                                  : cfg.budget_rounds();
    task.seed = run_seed;

    model::ParamVector params;
    fedsim::RoundHistory hist;
    if (algorithm == unlearn::Algorithm::retrain) {
        std::tie(params, hist) = unlearn::run_retrain(task, world, tc);
    } else if (algorithm == unlearn::Algorithm::finetune) {
        std::tie(params, hist) = unlearn::run_finetune_feature(trained, task, world, tc);
    } else {
        fedsim::FedConfig uc = tc;
        const double scale = algorithm == unlearn::Algorithm::grad_ascent
                                 ? cfg.unlearn_cfg.ascent_lr_scale
                                 : cfg.unlearn_cfg.lr_scale;
        uc.learning_rate = tc.learning_rate * scale;
        std::tie(params, hist) =
            unlearn::run_unlearn_rows(trained, task, world, uc, cfg.unlearn_cfg.kl_weight);
    }

    const std::string tag = cfg.dataset + "_" + unlearn::algorithm_name(algorithm) + "_s" +
                            std::to_string(run_seed);
    std::filesystem::create_directories(cfg.out_dir + "/checkpoints");
    model::save_params(params, cfg.out_dir + "/checkpoints/" + tag + ".fupv");
    runner::write_curve_csv(cfg.out_dir + "/curves/" + tag + ".csv", hist);

    nlohmann::json manifest;
    manifest["task"] = {{"dataset", cfg.dataset},
                        {"scenario", feature_scenario ? "feature" : "rows"},
                        {"algorithm", unlearn::algorithm_name(algorithm)},
                        {"budget_rounds", task.budget_rounds}};
    manifest["seeds"] = {{"run", pw.seeds.run_seed},     {"split", pw.seeds.split},
                         {"clients", pw.seeds.clients},   {"forget", pw.seeds.forget},
                         {"shuffle", pw.seeds.shuffle},   {"init", pw.seeds.init}};
    manifest["config_digest"] = runner::config_digest(cfg);
    std::ofstream mf(cfg.out_dir + "/" + tag + ".manifest.json");
    mf << manifest.dump(2) << '\n';

    const data::Dataset eval_ds =
        feature_scenario
            ? data::zero_feature(world.dataset, std::get<unlearn::FeatureScenario>(task.scenario).feature)
            : world.dataset;
    const auto fid = fedsim::evaluate(params, world.mspec, eval_ds, world.plan.test_idx);
    std::cout << unlearn::algorithm_name(algorithm) << " on " << cfg.dataset << " seed "
              << run_seed << ": f1=" << runner::fmt3(fid.f1) << " tpr=" << runner::fmt3(fid.tpr)
              << " ppv=" << runner::fmt3(fid.ppv) << " rounds=" << hist.size() << '\n';
    return 0;
}

int cmd_report(const std::string& out_dir) {
    const auto runs = runner::load_runs(out_dir);
    runner::render_reports(runs, out_dir);
    std::cout << "re-rendered reports for " << runs.size() << " runs under " << out_dir
              << "/reports\n";
    return 0;
}

int cmd_synth(std::uint64_t seed, std::size_t rows, const std::string& out_dir) {
    auto [table, schema] = data::synth_private(derive_seed(seed, "pr_synth"), rows);
    std::filesystem::create_directories(out_dir);
    data::save_table(table, schema.schema, out_dir + "/pr.csv", "no");
    data::save_schema(schema, out_dir + "/pr.schema.json");
    std::cout << "wrote " << table.n_rows() << " rows to " << out_dir << "/pr.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated unlearning benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir, dataset_dir, algorithm, checkpoint;
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* cmd, bool need_config) {
        if (need_config)
            cmd->add_option("--config", config_path, "experiment config file")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--dataset-dir", dataset_dir,
                        "dataset directory (overrides FEDUL_DATASET_DIR and config)");
        cmd->add_option("--seed", seed, "base seed override");
    };

    auto* bench = app.add_subcommand("bench", "run the full benchmark matrix");
    add_common(bench, true);
    auto* train = app.add_subcommand("train", "train the original model for one seed");
    add_common(train, true);
    auto* unlearn_cmd = app.add_subcommand("unlearn", "run one unlearning task for one seed");
    add_common(unlearn_cmd, true);
    unlearn_cmd->add_option("--algorithm", algorithm, "algorithm (default: first in config)");
    unlearn_cmd->add_option("--checkpoint", checkpoint,
                            "trained checkpoint to start from (default: train in-process)");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "re-render reports from persisted run metrics");
    report->add_option("--out", report_dir, "benchmark output directory")->required();

    std::uint64_t synth_seed = 7;
    std::size_t synth_rows = 2000;
    std::string synth_out = "data";
    auto* synth = app.add_subcommand("synth", "write the synthetic private dataset to disk");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--rows", synth_rows, "row count (>= 100)");
    synth->add_option("--out", synth_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) return cmd_bench(config_path, out_dir, dataset_dir, seed);
        if (train->parsed()) return cmd_train(config_path, out_dir, dataset_dir, seed);
        if (unlearn_cmd->parsed())
            return cmd_unlearn(config_path, out_dir, dataset_dir, seed, algorithm, checkpoint);
        if (report->parsed()) return cmd_report(report_dir);
        if (synth->parsed()) return cmd_synth(synth_seed, synth_rows, synth_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
