// synth.hpp - deterministic synthetic stand-in for the private finance dataset
//
// 18 features (12 numeric, 6 categorical), binary approval label with ~20%
// positives. The label follows a logistic link over a handful of features
// plus noise, so trained models have real signal to find.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedul/rng.hpp"
#include "fedul/table.hpp"

namespace fedul::data {

namespace synth_detail {

struct NumericGen {
    const char* name;
    double mean, sd;
    double lo, hi;   // clamp range
    int decimals;
    double coef;     // weight on the standardized value in the label score
};

struct CategoricalGen {
    const char* name;
    std::vector<const char*> categories;
    std::vector<double> weights;
    std::vector<double> offsets; // per-category label-score offsets
};

inline double round_to(double v, int decimals) {
    double s = 1.0;
    for (int i = 0; i < decimals; ++i) s *= 10.0;
    return std::floor(v * s + 0.5) / s;
}

} // namespace synth_detail

/// Generates the private-dataset stand-in. Deterministic in `seed`; the
/// intercept is bisected so the mean positive probability is 0.20.
inline std::pair<RawTable, SchemaFile> synth_private(std::uint64_t seed, std::size_t n_rows) {
    if (n_rows < 100) throw std::runtime_error("synth_private: need at least 100 rows");

    using synth_detail::CategoricalGen;
    using synth_detail::NumericGen;
    const std::vector<NumericGen> nums = {
        {"credit_score", 650.0, 90.0, 300.0, 850.0, 0, 1.35},
        {"income", 52000.0, 18000.0, 8000.0, 200000.0, 0, 1.00},
        {"debt_ratio", 0.32, 0.12, 0.0, 0.95, 3, -0.85},
        {"employment_years", 8.0, 6.0, 0.0, 45.0, 1, 0.45},
        {"age", 41.0, 12.0, 18.0, 80.0, 0, 0.0},
        {"loan_amount", 14000.0, 6000.0, 500.0, 60000.0, 0, 0.0},
        {"duration_months", 36.0, 14.0, 6.0, 84.0, 0, 0.0},
        {"savings_balance", 9000.0, 7000.0, 0.0, 90000.0, 0, 0.20},
        {"num_accounts", 3.0, 1.4, 0.0, 12.0, 0, 0.0},
        {"monthly_expense", 2100.0, 700.0, 300.0, 9000.0, 0, 0.0},
        {"prior_defaults", 0.4, 0.8, 0.0, 6.0, 0, -0.60},
        {"dependents", 1.2, 1.1, 0.0, 6.0, 0, 0.0},
    };
    const std::vector<CategoricalGen> cats = {
        {"housing",
         {"own", "mortgage", "rent"},
         {0.45, 0.30, 0.25},
         {0.30, 0.10, -0.20}},
        {"employment_type",
         {"salaried", "self_employed", "retired", "unemployed"},
         {0.60, 0.20, 0.10, 0.10},
         {0.20, 0.00, -0.10, -0.60}},
        {"purpose",
         {"car", "home", "education", "business", "other"},
         {0.30, 0.25, 0.15, 0.20, 0.10},
         {0.0, 0.0, 0.0, 0.0, 0.0}},
        {"region", {"north", "south", "east", "west"}, {0.25, 0.25, 0.25, 0.25}, {0, 0, 0, 0}},
        {"marital_status", {"single", "married", "divorced"}, {0.40, 0.45, 0.15}, {0, 0, 0}},
        {"channel", {"online", "branch", "broker"}, {0.50, 0.35, 0.15}, {0, 0, 0}},
    };

    SchemaFile sf;
    for (const auto& g : nums) sf.schema.features.push_back({g.name, FeatureKind::numeric, {}});
    for (const auto& g : cats) {
        FeatureSpec f;
        f.name = g.name;
        f.kind = FeatureKind::categorical;
        for (const char* c : g.categories) f.categories.emplace_back(c);
        sf.schema.features.push_back(std::move(f));
    }
    sf.schema.label_column = "approved";
    sf.schema.positive_label = "yes";
    sf.unlearn_candidates = {"credit_score", "income", "debt_ratio", "housing"};
    sf.notes = "synthetic stand-in generated by synth_private";
    sf.validate();

    Rng rng(derive_seed(seed, "synth_private"));
    RawTable table;
    for (const auto& f : sf.schema.features) table.feature_names.push_back(f.name);

    std::vector<double> scores(n_rows, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        std::vector<Cell> row;
        row.reserve(18);
        double score = 0.0;
        for (const auto& g : nums) {
            double v = g.mean + g.sd * rng.next_normal();
            v = std::min(g.hi, std::max(g.lo, v));
            v = synth_detail::round_to(v, g.decimals);
            if (g.coef != 0.0) score += g.coef * (v - g.mean) / g.sd;
            Cell c;
            c.num = v;
            row.push_back(std::move(c));
        }
        for (const auto& g : cats) {
            const double u = rng.next_double();
            double cum = 0.0;
            std::size_t pick = g.categories.size() - 1;
            for (std::size_t k = 0; k < g.categories.size(); ++k) {
                cum += g.weights[k];
                if (u < cum) { pick = k; break; }
            }
            score += g.offsets[pick];
            Cell c;
            c.cat = g.categories[pick];
            row.push_back(std::move(c));
        }
        score += 0.8 * rng.next_normal();
        scores[r] = score;
        table.rows.push_back(std::move(row));
    }

    // Calibrate the intercept so mean sigmoid(score + b) = 0.20.
    auto mean_prob = [&](double b) {
        double s = 0.0;
        for (double v : scores) s += 1.0 / (1.0 + std::exp(-(v + b)));
        return s / static_cast<double>(n_rows);
    };
    double lo = -20.0, hi = 20.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_prob(mid) < 0.20 ? lo : hi) = mid;
    }
    const double intercept = 0.5 * (lo + hi);

    table.labels.resize(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double p = 1.0 / (1.0 + std::exp(-(scores[r] + intercept)));
        table.labels[r] = rng.bernoulli(p) ? 1 : 0;
    }
    return {std::move(table), std::move(sf)};
}

} // namespace fedul::data
