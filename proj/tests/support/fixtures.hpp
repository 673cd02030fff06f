// fixtures.hpp - deterministic dataset fixtures for the test suites
//
// The real public CSVs are not redistributed with the repo; tests run on
// generated stand-ins with the same shape, column names and label balance,
// written through the ordinary CSV writer so the loader path is exercised
// end to end. Real files drop into the same schema descriptors.
#pragma once

#include <filesystem>
#include <string>

#include "fedul/rng.hpp"
#include "fedul/schema.hpp"
#include "fedul/table.hpp"

namespace fixtures {

using namespace fedul;

inline double round_to(double v, int decimals) {
    double s = 1.0;
    for (int i = 0; i < decimals; ++i) s *= 10.0;
    return std::floor(v * s + 0.5) / s;
}

inline data::SchemaFile diabetes_schema() {
    data::SchemaFile sf;
    for (const char* name : {"Pregnancies", "Glucose", "BloodPressure", "SkinThickness",
                             "Insulin", "BMI", "DiabetesPedigreeFunction", "Age"})
        sf.schema.features.push_back({name, data::FeatureKind::numeric, {}});
    sf.schema.label_column = "Outcome";
    sf.schema.positive_label = "1";
    sf.unlearn_candidates = {"Pregnancies", "Glucose", "BMI", "Age"};
    return sf;
}

/// Diabetes-shaped table: 768 rows, 8 numeric features, ~35% positives,
/// label from a logistic link over a few features.
inline data::RawTable diabetes_table(std::uint64_t seed = 20240801) {
    const std::size_t n = 768;
    Rng rng(derive_seed(seed, "db_fixture"));
    data::RawTable t;
    const auto sf = diabetes_schema();
    for (const auto& f : sf.schema.features) t.feature_names.push_back(f.name);

    struct Gen {
        double mean, sd, lo, hi;
        int dec;
        double coef;
    };
    const Gen gens[8] = {
        {3.8, 3.4, 0.0, 17.0, 0, 0.70},      // Pregnancies
        {121.0, 31.0, 44.0, 199.0, 0, 1.70}, // Glucose
        {72.0, 12.0, 24.0, 122.0, 0, -0.10}, // BloodPressure
        {29.0, 10.0, 7.0, 99.0, 0, 0.15},    // SkinThickness
        {120.0, 95.0, 14.0, 850.0, 0, 0.15}, // Insulin
        {32.4, 6.9, 18.2, 67.1, 1, 0.85},    // BMI
        {0.47, 0.33, 0.078, 2.42, 3, 0.45},  // DiabetesPedigreeFunction
        {33.0, 11.8, 21.0, 81.0, 0, 0.55},   // Age
    };

    std::vector<double> scores(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<data::Cell> row;
        double score = 0.0;
        for (const auto& g : gens) {
            double v = g.mean + g.sd * rng.next_normal();
            v = std::min(g.hi, std::max(g.lo, v));
            v = round_to(v, g.dec);
            score += g.coef * (v - g.mean) / g.sd;
            data::Cell c;
            c.num = v;
            row.push_back(c);
        }
        score += 1.2 * rng.next_normal();
        scores[r] = score;
        t.rows.push_back(std::move(row));
    }

    auto mean_prob = [&](double b) {
        double s = 0.0;
        for (double v : scores) s += 1.0 / (1.0 + std::exp(-(v + b)));
        return s / static_cast<double>(n);
    };
    double lo = -20.0, hi = 20.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_prob(mid) < 0.349 ? lo : hi) = mid;
    }
    const double intercept = 0.5 * (lo + hi);
    t.labels.resize(n);
    for (std::size_t r = 0; r < n; ++r)
        t.labels[r] = rng.bernoulli(1.0 / (1.0 + std::exp(-(scores[r] + intercept)))) ? 1 : 0;
    return t;
}

inline data::SchemaFile bank_loan_schema() {
    data::SchemaFile sf;
    for (const char* name : {"Age", "Experience", "Income", "Family", "CCAvg", "Mortgage"})
        sf.schema.features.push_back({name, data::FeatureKind::numeric, {}});
    sf.schema.features.push_back(
        {"Education", data::FeatureKind::categorical, {"1", "2", "3"}});
    for (const char* name : {"Securities Account", "CD Account", "Online", "CreditCard"})
        sf.schema.features.push_back({name, data::FeatureKind::numeric, {}});
    sf.schema.label_column = "Personal Loan";
    sf.schema.positive_label = "1";
    sf.unlearn_candidates = {"Age", "Income", "Family", "CCAvg"};
    return sf;
}

/// Bank-loan-shaped table: 5000 rows with exactly 480 positives (9.6%).
/// The 480 highest-scoring rows take the positive label, so the count is
/// exact and the label still tracks the features.
inline data::RawTable bank_loan_table(std::uint64_t seed = 20240802) {
    const std::size_t n = 5000;
    Rng rng(derive_seed(seed, "bl_fixture"));
    data::RawTable t;
    const auto sf = bank_loan_schema();
    for (const auto& f : sf.schema.features) t.feature_names.push_back(f.name);

    std::vector<double> scores(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<data::Cell> row(11);
        const double age = round_to(std::clamp(45.0 + 11.5 * rng.next_normal(), 23.0, 67.0), 0);
        const double exp_years = std::max(0.0, round_to(age - 25.0 + 2.0 * rng.next_normal(), 0));
        const double income = round_to(std::clamp(74.0 + 46.0 * rng.next_normal(), 8.0, 224.0), 0);
        const double family = 1.0 + static_cast<double>(rng.next_below(4));
        const double ccavg = round_to(std::clamp(1.9 + 1.7 * rng.next_normal(), 0.0, 10.0), 1);
        const double mortgage =
            rng.bernoulli(0.3) ? round_to(std::clamp(101.0 + 102.0 * rng.next_normal(), 0.0, 635.0), 0)
                               : 0.0;
        const std::size_t edu = rng.next_below(3);
        const double securities = rng.bernoulli(0.104) ? 1.0 : 0.0;
        const double cd = rng.bernoulli(0.06) ? 1.0 : 0.0;
        const double online = rng.bernoulli(0.6) ? 1.0 : 0.0;
        const double card = rng.bernoulli(0.29) ? 1.0 : 0.0;

        row[0].num = age;
        row[1].num = exp_years;
        row[2].num = income;
        row[3].num = family;
        row[4].num = ccavg;
        row[5].num = mortgage;
        row[6].cat = std::to_string(edu + 1);
        row[7].num = securities;
        row[8].num = cd;
        row[9].num = online;
        row[10].num = card;
        t.rows.push_back(std::move(row));

        scores[r] = 1.3 * (income - 74.0) / 46.0 + 0.8 * (ccavg - 1.9) / 1.7 +
                    0.6 * (edu == 2 ? 1.0 : edu == 1 ? 0.3 : 0.0) + 1.0 * cd +
                    0.4 * rng.next_normal();
    }

    // exactly 480 positives: the top-scoring rows
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    t.labels.assign(n, 0);
    for (std::size_t i = 0; i < 480; ++i) t.labels[order[i]] = 1;
    return t;
}

/// Writes a fixture dataset + schema descriptor into `dir` under the ids the
/// runner expects (<id>.csv, <id>.schema.json). Returns the csv path.
inline std::string write_dataset(const std::string& dir, const std::string& id) {
    std::filesystem::create_directories(dir);
    data::RawTable table;
    data::SchemaFile sf;
    std::string negative;
    if (id == "db") {
        table = diabetes_table();
        sf = diabetes_schema();
        negative = "0";
    } else if (id == "bl") {
        table = bank_loan_table();
        sf = bank_loan_schema();
        negative = "0";
    } else {
        throw std::runtime_error("no fixture for dataset id '" + id + "'");
    }
    const std::string csv = dir + "/" + id + ".csv";
    data::save_table(table, sf.schema, csv, negative);
    data::save_schema(sf, dir + "/" + id + ".schema.json");
    return csv;
}

} // namespace fixtures
