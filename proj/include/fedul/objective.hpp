// objective.hpp - training/unlearning objectives evaluated on client batches
#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedul/model.hpp"

namespace fedul::unlearn {

/// What a local SGD step minimizes:
///   descend  L(retain)
///   ascend  -L(forget)                      (stepping downhill ascends the forget loss)
///   diff     L(retain) - L(forget)
///   kl       kl_weight * KL(ref || cur) on retain - L(forget)
enum class ObjectiveMode { descend, ascend, diff, kl };

struct Objective {
    ObjectiveMode mode = ObjectiveMode::descend;
    // Global forget-row ids (sorted). Each client intersects this with its
    // own shard, so forget data never has to leave the client it lives on.
    std::vector<std::size_t> forget_idx;
    std::optional<model::ParamVector> reference_params; // kl only
    double kl_weight = 1.0;

    bool needs_forget() const { return mode != ObjectiveMode::descend; }

    void validate(const model::ParamVector& params) const {
        if (mode == ObjectiveMode::kl) {
            if (!reference_params)
                throw std::runtime_error("kl objective requires reference params");
            if (!reference_params->same_layout(params))
                throw std::runtime_error("kl objective: reference param layout mismatch");
        }
        if (needs_forget() && forget_idx.empty())
            throw std::runtime_error("objective requires a non-empty forget set");
    }
};

/// Loss value and gradient of the objective for one client step. Batches the
/// mode does not use may be null; batches it requires must be present.
inline std::pair<double, model::ParamVector> objective_loss_and_grad(
    const Objective& obj, const model::ParamVector& p, const model::ModelSpec& spec,
    const model::Batch* retain, const model::Batch* forget) {
    using model::Batch;

    auto require = [](const Batch* b, const char* what) -> const Batch& {
        if (!b || b->size() == 0) throw std::runtime_error(std::string("objective: missing ") + what + " batch");
        return *b;
    };
    const bool has_retain = retain && retain->size() > 0;
    const bool has_forget = forget && forget->size() > 0;

    double loss = 0.0;
    model::ParamVector grad = model::zero_params_like(spec);

    switch (obj.mode) {
    case ObjectiveMode::descend: {
        const Batch& rb = require(retain, "retain");
        loss = model::bce_loss(p, spec, rb);
        grad = model::bce_grad(p, spec, rb);
        break;
    }
    case ObjectiveMode::ascend: {
        const Batch& fb = require(forget, "forget");
        loss = -model::bce_loss(p, spec, fb);
        grad = model::bce_grad(p, spec, fb).scale(-1.0);
        break;
    }
    case ObjectiveMode::diff: {
        if (!has_retain && !has_forget) require(retain, "retain");
        if (has_retain) {
            loss += model::bce_loss(p, spec, *retain);
            grad.add_scaled(model::bce_grad(p, spec, *retain), 1.0);
        }
        if (has_forget) {
            loss -= model::bce_loss(p, spec, *forget);
            grad.add_scaled(model::bce_grad(p, spec, *forget), -1.0);
        }
        break;
    }
    case ObjectiveMode::kl: {
        if (!obj.reference_params)
            throw std::runtime_error("kl objective requires reference params");
        if (!obj.reference_params->same_layout(p))
            throw std::runtime_error("kl objective: reference param layout mismatch");
        if (!has_retain && !has_forget) require(retain, "retain");
        if (has_retain) {
            const auto ref = model::predict_proba(*obj.reference_params, spec, retain->x);
            const auto f = model::forward(p, spec, retain->x);
            loss += obj.kl_weight * model::mean_kl_bernoulli(ref, f.probs);
            auto d = model::kl_dlogit(f, ref);
            for (double& v : d) v *= obj.kl_weight;
            grad.add_scaled(model::backward_from_dlogit(p, spec, retain->x, f, d), 1.0);
        }
        if (has_forget) {
            loss -= model::bce_loss(p, spec, *forget);
            grad.add_scaled(model::bce_grad(p, spec, *forget), -1.0);
        }
        break;
    }
    }
    return {loss, std::move(grad)};
}

} // namespace fedul::unlearn
