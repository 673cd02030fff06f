// metrics.hpp - fidelity, certifiability and efficiency metrics
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedul::metrics {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

struct FidelityReport {
    double f1 = 0.0;
    double tpr = 0.0;
    double ppv = 0.0;
};

struct CertifiabilityScore {
    double residual_norm = 0.0;
    enum class EvalSet { full_data, forget_set } eval_set_kind = EvalSet::full_data;
};

inline ConfusionCounts confusion(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw std::runtime_error("confusion: prediction/label length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] == 1)
            preds[i] == 1 ? ++c.tp : ++c.fn;
        else
            preds[i] == 1 ? ++c.fp : ++c.tn;
    }
    return c;
}

/// PPV, TPR and their harmonic mean. Any 0/0 term is defined as 0, so a
/// degenerate classifier scores 0 rather than blowing up.
inline FidelityReport fidelity(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::runtime_error("fidelity: empty confusion counts");
    FidelityReport r;
    r.ppv = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    r.tpr = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    r.f1 = (r.ppv + r.tpr) > 0.0 ? 2.0 * r.ppv * r.tpr / (r.ppv + r.tpr) : 0.0;
    return r;
}

/// Root-mean-square difference between two probability vectors evaluated on
/// the same rows: ||u - r||_2 / sqrt(n). Zero iff the outputs are identical.
inline CertifiabilityScore residual_norm(std::span<const double> unlearned_probs,
                                         std::span<const double> retrain_probs,
                                         CertifiabilityScore::EvalSet kind) {
    if (unlearned_probs.size() != retrain_probs.size() || unlearned_probs.empty())
        throw std::runtime_error("residual_norm: length mismatch");
    double ss = 0.0;
    for (std::size_t i = 0; i < unlearned_probs.size(); ++i) {
        const double d = unlearned_probs[i] - retrain_probs[i];
        ss += d * d;
    }
    CertifiabilityScore s;
    s.residual_norm = std::sqrt(ss / static_cast<double>(unlearned_probs.size()));
    s.eval_set_kind = kind;
    return s;
}

/// First round r whose window [r, r+patience) (clipped at the end of the
/// curve) stays within epsilon of the final value. The last round always
/// qualifies, so a curve that never settles reports its full length.
inline std::size_t rounds_to_convergence(std::span<const double> f1_curve, double epsilon,
                                         std::size_t patience) {
    if (f1_curve.empty()) throw std::runtime_error("rounds_to_convergence: empty history");
    if (!(epsilon > 0.0)) throw std::runtime_error("rounds_to_convergence: epsilon must be > 0");
    const std::size_t n = f1_curve.size();
    const double final_f1 = f1_curve[n - 1];
    for (std::size_t r = 0; r < n; ++r) {
        bool ok = true;
        for (std::size_t k = r; k < std::min(n, r + patience); ++k)
            if (std::abs(f1_curve[k] - final_f1) > epsilon) { ok = false; break; }
        if (ok) return r + 1; // rounds are 1-based
    }
    return n;
}

struct RunSummary {
    double mean = 0.0;
    double stddev = 0.0; // sample std, n-1 denominator
    std::size_t n_runs = 0;
    std::vector<std::string> warnings;
};

inline RunSummary summarize_runs(std::span<const double> values) {
    if (values.empty()) throw std::runtime_error("summarize_runs: no values");
    RunSummary s;
    s.n_runs = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() == 1) {
        s.warnings.push_back("single run; standard deviation reported as 0");
        return s;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

} // namespace fedul::metrics
