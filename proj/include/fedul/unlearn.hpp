// unlearn.hpp - unlearning tasks: retrain baseline, feature fine-tuning,
// and the gradient-based row unlearners
#pragma once

#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedul/dataset.hpp"
#include "fedul/fedsim.hpp"
#include "fedul/split.hpp"

namespace fedul::unlearn {

enum class Algorithm { retrain, finetune, grad_ascent, grad_diff, kl_min };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::retrain: return "retrain";
    case Algorithm::finetune: return "finetune";
    case Algorithm::grad_ascent: return "grad_ascent";
    case Algorithm::grad_diff: return "grad_diff";
    case Algorithm::kl_min: return "kl_min";
    }
    return "?";
}

inline Algorithm algorithm_from_name(const std::string& name) {
    for (Algorithm a : {Algorithm::retrain, Algorithm::finetune, Algorithm::grad_ascent,
                        Algorithm::grad_diff, Algorithm::kl_min})
        if (name == algorithm_name(a)) return a;
    throw std::runtime_error("unknown algorithm '" + name + "'");
}

struct FeatureScenario {
    std::string feature;
};
struct RowsScenario {
    std::vector<std::size_t> forget_idx; // sorted row ids within train_idx
    double rate = 0.0;
};

struct UnlearnTask {
    std::variant<FeatureScenario, RowsScenario> scenario;
    Algorithm algorithm = Algorithm::retrain;
    std::size_t budget_rounds = 100;
    std::uint64_t seed = 0;

    bool is_feature() const { return std::holds_alternative<FeatureScenario>(scenario); }

    void validate() const {
        if (is_feature()) {
            if (algorithm != Algorithm::retrain && algorithm != Algorithm::finetune)
                throw std::runtime_error(std::string("feature scenario cannot pair with ") +
                                         algorithm_name(algorithm));
        } else {
            if (algorithm == Algorithm::finetune)
                throw std::runtime_error("rows scenario cannot pair with finetune");
        }
    }
};

/// The data a run happens in: one preprocessed dataset, its split plan, and
/// the model architecture.
struct World {
    data::Dataset dataset;
    data::SplitPlan plan;
    model::ModelSpec mspec;
};

namespace detail {

inline std::vector<fedsim::ClientState> make_clients(const data::SplitPlan& plan) {
    std::vector<fedsim::ClientState> clients;
    clients.reserve(plan.client_assignment.size());
    for (const auto& [id, rows] : plan.client_assignment)
        clients.push_back({id, rows});
    return clients;
}

/// Shards with the forget rows dropped. A shard emptied entirely drops out
/// of the round loop with a warning.
inline std::vector<fedsim::ClientState> make_clients_without(
    const data::SplitPlan& plan, const std::vector<std::size_t>& forget_sorted,
    std::vector<std::string>* warnings) {
    std::vector<fedsim::ClientState> clients;
    for (const auto& [id, rows] : plan.client_assignment) {
        std::vector<std::size_t> sorted(rows.begin(), rows.end());
        std::sort(sorted.begin(), sorted.end());
        auto kept = fedsim::detail::difference_sorted(sorted, forget_sorted);
        if (kept.empty()) {
            if (warnings)
                warnings->push_back("client " + std::to_string(id) +
                                    " lost all rows to the forget set and drops out");
            continue;
        }
        clients.push_back({id, std::move(kept)});
    }
    if (clients.empty()) throw std::runtime_error("all client shards emptied by row removal");
    return clients;
}

inline const FeatureScenario& feature_of(const UnlearnTask& task) {
    return std::get<FeatureScenario>(task.scenario);
}
inline const RowsScenario& rows_of(const UnlearnTask& task) {
    return std::get<RowsScenario>(task.scenario);
}

} // namespace detail

/// Retrain-from-scratch baseline. Feature scenario trains on the zeroed
/// data; rows scenario trains with the forget rows removed from every shard.
/// Runs the full cfg.n_rounds budget.
inline std::pair<model::ParamVector, fedsim::RoundHistory> run_retrain(
    const UnlearnTask& task, const World& world, const fedsim::FedConfig& cfg,
    std::vector<std::string>* warnings = nullptr) {
    task.validate();
    if (task.algorithm != Algorithm::retrain)
        throw std::runtime_error("run_retrain: task algorithm is not retrain");

    model::ModelSpec spec = world.mspec;
    spec.init_seed = derive_seed(task.seed, "retrain_init");
    Objective obj; // plain descend

    if (task.is_feature()) {
        const auto zeroed = data::zero_feature(world.dataset, detail::feature_of(task).feature);
        return fedsim::run_federated(detail::make_clients(world.plan), zeroed, spec,
                                     model::init_params(spec), obj, cfg, world.plan.test_idx);
    }
    const auto& rows = detail::rows_of(task);
    auto clients = detail::make_clients_without(world.plan, rows.forget_idx, warnings);
    return fedsim::run_federated(clients, world.dataset, spec, model::init_params(spec), obj,
                                 cfg, world.plan.test_idx);
}

/// Feature unlearning by continued training: keep the trained weights and
/// descend on the zeroed data for budget_rounds.
inline std::pair<model::ParamVector, fedsim::RoundHistory> run_finetune_feature(
    const model::ParamVector& trained, const UnlearnTask& task, const World& world,
    const fedsim::FedConfig& cfg) {
    task.validate();
    if (!task.is_feature() || task.algorithm != Algorithm::finetune)
        throw std::runtime_error("run_finetune_feature: task is not feature/finetune");
    if (trained.size() != world.mspec.param_count())
        throw std::runtime_error("run_finetune_feature: trained params do not fit model");

    fedsim::FedConfig run_cfg = cfg;
    run_cfg.n_rounds = task.budget_rounds;
    // A separate FL run draws its own batch schedule; only retrain shares the
    // original stream (its rate-0 trajectory must match original training).
    run_cfg.shuffle_seed = derive_seed(cfg.shuffle_seed, "finetune_batches", task.seed);
    if (task.budget_rounds == 0) return {trained, {}};

    const auto zeroed = data::zero_feature(world.dataset, detail::feature_of(task).feature);
    Objective obj;
    return fedsim::run_federated(detail::make_clients(world.plan), zeroed, world.mspec, trained,
                                 obj, run_cfg, world.plan.test_idx);
}

/// Row unlearning from a trained model with one of the gradient objectives.
/// kl_min snapshots `trained` as the reference distribution.
inline std::pair<model::ParamVector, fedsim::RoundHistory> run_unlearn_rows(
    const model::ParamVector& trained, const UnlearnTask& task, const World& world,
    const fedsim::FedConfig& cfg, double kl_weight = 1.0) {
    task.validate();
    if (task.is_feature()) throw std::runtime_error("run_unlearn_rows: task is not a rows task");
    const auto& rows = detail::rows_of(task);
    if (rows.forget_idx.empty()) throw std::runtime_error("run_unlearn_rows: empty forget set");

    Objective obj;
    switch (task.algorithm) {
    case Algorithm::grad_ascent: obj.mode = ObjectiveMode::ascend; break;
    case Algorithm::grad_diff: obj.mode = ObjectiveMode::diff; break;
    case Algorithm::kl_min:
        obj.mode = ObjectiveMode::kl;
        obj.reference_params = trained;
        obj.kl_weight = kl_weight;
        break;
    default:
        throw std::runtime_error("run_unlearn_rows: algorithm/scenario mismatch");
    }
    obj.forget_idx = rows.forget_idx;

    fedsim::FedConfig run_cfg = cfg;
    run_cfg.n_rounds = task.budget_rounds;
    run_cfg.shuffle_seed = derive_seed(cfg.shuffle_seed, algorithm_name(task.algorithm), task.seed);
    if (task.budget_rounds == 0) return {trained, {}};

    return fedsim::run_federated(detail::make_clients(world.plan), world.dataset, world.mspec,
                                 trained, obj, run_cfg, world.plan.test_idx);
}

} // namespace fedul::unlearn
