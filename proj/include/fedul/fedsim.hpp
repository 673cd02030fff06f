// fedsim.hpp - FedAvg simulation loop
//
// The server side of the protocol only ever sees parameter vectors and
// sample counts; rows stay inside local_update. Batch order is re-derived
// from shard-local positions over a sorted shard, so how a shard happens to
// be stored cannot leak into the results.
#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedul/dataset.hpp"
#include "fedul/metrics.hpp"
#include "fedul/model.hpp"
#include "fedul/objective.hpp"
#include "fedul/rng.hpp"

namespace fedul::fedsim {

struct ClientState {
    int client_id = 0;
    std::vector<std::size_t> rows; // indices into the shared Dataset

    std::size_t sample_count() const { return rows.size(); }
};

struct FedConfig {
    std::size_t n_rounds = 100;
    std::size_t local_epochs = 1;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    std::uint64_t shuffle_seed = 0;

    bool operator==(const FedConfig&) const = default;

    void validate() const {
        if (local_epochs < 1 || batch_size < 1)
            throw std::runtime_error("fed config: counts must be >= 1");
        if (!(learning_rate >= 0.0)) throw std::runtime_error("fed config: bad learning rate");
    }
};

struct RoundRecord {
    std::size_t round = 0; // 1-based
    std::uint64_t param_digest = 0;
    metrics::FidelityReport fidelity;
};

using RoundHistory = std::vector<RoundRecord>;

/// Copies the given rows into a dense batch. This is the only path training
/// reads feature rows through, which is what makes the row-access audit
/// meaningful.
inline model::Batch gather_batch(const data::Dataset& ds, std::span<const std::size_t> rows) {
    model::Batch b;
    b.x = Matrix(rows.size(), ds.n_cols());
    b.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        ds.note_train_access(r);
        const auto src = ds.x.row(r);
        std::copy(src.begin(), src.end(), b.x.row(i).begin());
        b.y[i] = ds.y[r];
    }
    return b;
}

namespace detail {

/// Canonical shard order (sorted row ids) permuted by a stream keyed on
/// (seed, round, client, epoch). Storage order of the shard is irrelevant.
inline std::vector<std::size_t> epoch_order(std::span<const std::size_t> rows,
                                            std::uint64_t shuffle_seed, std::size_t round,
                                            int client_id, std::size_t epoch) {
    std::vector<std::size_t> sorted(rows.begin(), rows.end());
    std::sort(sorted.begin(), sorted.end());
    Rng rng(derive_seed(shuffle_seed, "batch_order",
                        (static_cast<std::uint64_t>(round) << 20) ^ static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(client_id)));
    const auto perm = rng.permutation(sorted.size());
    std::vector<std::size_t> out(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) out[i] = sorted[perm[i]];
    return out;
}

inline std::vector<std::size_t> intersect_sorted(std::span<const std::size_t> shard_sorted,
                                                 std::span<const std::size_t> forget_sorted) {
    std::vector<std::size_t> out;
    std::set_intersection(shard_sorted.begin(), shard_sorted.end(), forget_sorted.begin(),
                          forget_sorted.end(), std::back_inserter(out));
    return out;
}

inline std::vector<std::size_t> difference_sorted(std::span<const std::size_t> shard_sorted,
                                                  std::span<const std::size_t> forget_sorted) {
    std::vector<std::size_t> out;
    std::set_difference(shard_sorted.begin(), shard_sorted.end(), forget_sorted.begin(),
                        forget_sorted.end(), std::back_inserter(out));
    return out;
}

} // namespace detail

/// One client's contribution to a round: local_epochs of mini-batch SGD on
/// the shard under the objective, starting from the broadcast parameters.
/// Modes that use both views pair each retain batch with a forget batch
/// cycled from the client's local forget rows.
inline std::pair<model::ParamVector, std::size_t> local_update(
    const ClientState& client, const data::Dataset& ds, const model::ParamVector& global_params,
    const unlearn::Objective& obj, const model::ModelSpec& spec, const FedConfig& cfg,
    std::size_t round) {
    cfg.validate();
    if (client.rows.empty()) throw std::runtime_error("local_update: empty client shard");
    obj.validate(global_params);

    std::vector<std::size_t> shard_sorted(client.rows.begin(), client.rows.end());
    std::sort(shard_sorted.begin(), shard_sorted.end());
    const auto retain_view = detail::difference_sorted(shard_sorted, obj.forget_idx);
    const auto forget_view = detail::intersect_sorted(shard_sorted, obj.forget_idx);

    model::ParamVector params = global_params;
    const double lr = cfg.learning_rate;
    if (lr == 0.0) return {params, client.sample_count()};

    using unlearn::ObjectiveMode;
    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        // Primary stream: the view whose batches drive the step count.
        const bool forget_primary =
            obj.mode == ObjectiveMode::ascend ||
            (obj.mode != ObjectiveMode::descend && retain_view.empty());
        const auto& primary_rows = forget_primary ? forget_view : retain_view;
        if (primary_rows.empty()) continue; // nothing for this client to do

        const auto primary = detail::epoch_order(primary_rows, cfg.shuffle_seed, round,
                                                 client.client_id, epoch);
        std::vector<std::size_t> secondary;
        const bool pair_forget = !forget_primary && obj.needs_forget() && !forget_view.empty();
        if (pair_forget)
            secondary = detail::epoch_order(forget_view, cfg.shuffle_seed, round,
                                            client.client_id, epoch + 0x10000);

        std::size_t sec_at = 0;
        for (std::size_t at = 0; at < primary.size(); at += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, primary.size() - at);
            const auto batch = gather_batch(ds, {primary.data() + at, take});

            model::Batch forget_batch;
            if (pair_forget) {
                const std::size_t ftake = std::min(cfg.batch_size, secondary.size());
                std::vector<std::size_t> frows(ftake);
                for (std::size_t i = 0; i < ftake; ++i)
                    frows[i] = secondary[(sec_at + i) % secondary.size()];
                sec_at = (sec_at + ftake) % secondary.size();
                forget_batch = gather_batch(ds, frows);
            }

            const model::Batch* retain_ptr = forget_primary ? nullptr : &batch;
            const model::Batch* forget_ptr =
                forget_primary ? &batch : (pair_forget ? &forget_batch : nullptr);
            auto [loss, grad] = unlearn::objective_loss_and_grad(obj, params, spec,
                                                                 retain_ptr, forget_ptr);
            (void)loss;
            params.add_scaled(grad, -lr);
        }
    }
    return {params, client.sample_count()};
}

/// Sample-count-weighted element-wise mean of client parameters.
inline model::ParamVector fedavg_aggregate(
    const std::vector<std::pair<model::ParamVector, std::size_t>>& updates) {
    if (updates.empty()) throw std::runtime_error("fedavg_aggregate: no updates");
    double total = 0.0;
    for (const auto& [p, n] : updates) {
        if (!p.same_layout(updates.front().first))
            throw std::runtime_error("fedavg_aggregate: layout mismatch");
        total += static_cast<double>(n);
    }
    if (total <= 0.0) throw std::runtime_error("fedavg_aggregate: zero total weight");

    model::ParamVector agg = updates.front().first;
    for (double& v : agg.values) v = 0.0;
    for (const auto& [p, n] : updates)
        agg.add_scaled(p, static_cast<double>(n) / total);
    return agg;
}

inline metrics::FidelityReport evaluate(const model::ParamVector& p, const model::ModelSpec& spec,
                                        const data::Dataset& ds,
                                        std::span<const std::size_t> rows) {
    if (rows.empty()) return {};
    Matrix x(rows.size(), ds.n_cols());
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = ds.x.row(rows[i]);
        std::copy(src.begin(), src.end(), x.row(i).begin());
        y[i] = ds.y[rows[i]];
    }
    const auto preds = model::classify(p, spec, x);
    return metrics::fidelity(metrics::confusion(preds, y));
}

/// The round loop: broadcast, local updates, weighted aggregation, then an
/// evaluation snapshot on `eval_rows`. Deterministic given the seeds; the
/// result does not depend on the order clients are listed in beyond float
/// reassociation in the aggregate sum.
inline std::pair<model::ParamVector, RoundHistory> run_federated(
    const std::vector<ClientState>& clients, const data::Dataset& ds,
    const model::ModelSpec& spec, model::ParamVector init, const unlearn::Objective& obj,
    const FedConfig& cfg, std::span<const std::size_t> eval_rows) {
    if (clients.empty()) throw std::runtime_error("run_federated: no clients");
    cfg.validate();

    model::ParamVector global = std::move(init);
    RoundHistory history;
    history.reserve(cfg.n_rounds);

    for (std::size_t round = 1; round <= cfg.n_rounds; ++round) {
        std::vector<std::pair<model::ParamVector, std::size_t>> updates;
        updates.reserve(clients.size());
        for (const auto& client : clients)
            updates.push_back(local_update(client, ds, global, obj, spec, cfg, round));

        global = fedavg_aggregate(updates);

        RoundRecord rec;
        rec.round = round;
        rec.param_digest = model::digest(global);
        rec.fidelity = evaluate(global, spec, ds, eval_rows);
        history.push_back(rec);
    }
    return {std::move(global), std::move(history)};
}

inline std::vector<double> f1_curve(const RoundHistory& history) {
    std::vector<double> out;
    out.reserve(history.size());
    for (const auto& r : history) out.push_back(r.fidelity.f1);
    return out;
}

} // namespace fedul::fedsim

namespace fedul::metrics {

/// Convenience overload matching how callers hold histories.
inline std::size_t rounds_to_convergence(const fedsim::RoundHistory& history, double epsilon,
                                         std::size_t patience) {
    return rounds_to_convergence(fedsim::f1_curve(history), epsilon, patience);
}

} // namespace fedul::metrics
