// dataset.hpp - preprocessing raw tables into numeric training matrices
#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedul/common.hpp"
#include "fedul/table.hpp"

namespace fedul::data {

/// Per-feature statistics fitted on the training rows only. Applying them to
/// any row (train or test) is a pure lookup, so test rows can never leak into
/// the fit.
struct PreprocessStats {
    struct NumericStat {
        std::string feature;
        double mean = 0.0;
        double stddev = 0.0; // population std over train rows
        double median = 0.0; // imputation value for missing cells
        bool zero_variance = false;

        bool operator==(const NumericStat&) const = default;
    };
    struct CategoricalMap {
        std::string feature;
        std::vector<std::string> columns; // category names + trailing "<missing>"

        bool operator==(const CategoricalMap&) const = default;
    };

    std::vector<NumericStat> numeric;
    std::vector<CategoricalMap> categorical;
    std::vector<std::string> warnings;

    bool operator==(const PreprocessStats& o) const {
        return numeric == o.numeric && categorical == o.categorical;
    }
};

/// Fully numeric dataset: standardized numerics and one-hot categoricals.
/// `source_feature[c]` names the original feature that column c came from.
struct Dataset {
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> col_names;
    std::vector<std::string> source_feature;

    // Test-only instrumentation: counts gradient-path reads per row. Shared
    // across copies so zeroed variants keep feeding the same log.
    std::shared_ptr<std::vector<std::uint64_t>> train_access;

    std::size_t n_rows() const { return x.rows(); }
    std::size_t n_cols() const { return x.cols(); }

    void enable_access_tracking() {
        train_access = std::make_shared<std::vector<std::uint64_t>>(n_rows(), 0);
    }
    void note_train_access(std::size_t row) const {
        if (train_access) (*train_access)[row] += 1;
    }

    void validate() const {
        if (x.rows() != y.size()) throw std::runtime_error("dataset: row/label count mismatch");
        if (x.cols() != col_names.size() || x.cols() != source_feature.size())
            throw std::runtime_error("dataset: column metadata mismatch");
        if (!x.all_finite()) throw std::runtime_error("dataset: non-finite value");
    }

    std::vector<std::size_t> columns_of_feature(std::string_view feature) const {
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < source_feature.size(); ++c)
            if (source_feature[c] == feature) cols.push_back(c);
        return cols;
    }
};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

/// Fits preprocessing on the train rows and transforms the whole table.
/// Numerics: train-median imputation, then (v - mean) / std with train-row
/// moments. Zero-variance columns become all zeros and are reported as a
/// warning. Categoricals: one-hot over the schema categories plus a trailing
/// "<missing>" column so the layout never depends on where gaps happen to be.
inline std::pair<Dataset, PreprocessStats> fit_transform(const RawTable& raw, const Schema& schema,
                                                         std::span<const std::size_t> train_idx) {
    if (train_idx.empty()) throw std::runtime_error("fit_transform: empty train index list");
    for (std::size_t i : train_idx)
        if (i >= raw.n_rows()) throw std::runtime_error("fit_transform: train index out of range");

    PreprocessStats stats;
    Dataset ds;
    ds.y = raw.labels;

    // Pass 1: fit per-feature stats on train rows and lay out output columns.
    std::vector<std::size_t> col_offset(schema.features.size(), 0);
    std::size_t n_cols = 0;
    for (std::size_t fi = 0; fi < schema.features.size(); ++fi) {
        const auto& spec = schema.features[fi];
        col_offset[fi] = n_cols;
        if (spec.kind == FeatureKind::numeric) {
            std::vector<double> present;
            present.reserve(train_idx.size());
            for (std::size_t r : train_idx) {
                const Cell& c = raw.rows[r][fi];
                if (!c.missing) present.push_back(c.num);
            }
            PreprocessStats::NumericStat st;
            st.feature = spec.name;
            st.median = detail::median_of(present);
            if (present.empty()) {
                st.zero_variance = true;
                stats.warnings.push_back("numeric feature '" + spec.name +
                                         "' has no observed train values; column zeroed");
            } else {
                double sum = 0.0;
                for (std::size_t r : train_idx) {
                    const Cell& c = raw.rows[r][fi];
                    sum += c.missing ? st.median : c.num;
                }
                st.mean = sum / static_cast<double>(train_idx.size());
                double ss = 0.0;
                for (std::size_t r : train_idx) {
                    const Cell& c = raw.rows[r][fi];
                    const double v = (c.missing ? st.median : c.num) - st.mean;
                    ss += v * v;
                }
                st.stddev = std::sqrt(ss / static_cast<double>(train_idx.size()));
                if (st.stddev <= 0.0) {
                    st.zero_variance = true;
                    stats.warnings.push_back("numeric feature '" + spec.name +
                                             "' has zero variance on train rows; column zeroed");
                }
            }
            stats.numeric.push_back(std::move(st));
            ds.col_names.push_back(spec.name);
            ds.source_feature.push_back(spec.name);
            n_cols += 1;
        } else {
            PreprocessStats::CategoricalMap cm;
            cm.feature = spec.name;
            for (const auto& cat : spec.categories) {
                cm.columns.push_back(cat);
                ds.col_names.push_back(spec.name + "=" + cat);
                ds.source_feature.push_back(spec.name);
            }
            cm.columns.push_back("<missing>");
            ds.col_names.push_back(spec.name + "=<missing>");
            ds.source_feature.push_back(spec.name);
            n_cols += cm.columns.size();
            stats.categorical.push_back(std::move(cm));
        }
    }

    // Pass 2: transform every row with the fitted stats.
    ds.x = Matrix(raw.n_rows(), n_cols);
    std::size_t num_i = 0, cat_i = 0;
    for (std::size_t fi = 0; fi < schema.features.size(); ++fi) {
        const auto& spec = schema.features[fi];
        const std::size_t base = col_offset[fi];
        if (spec.kind == FeatureKind::numeric) {
            const auto& st = stats.numeric[num_i++];
            for (std::size_t r = 0; r < raw.n_rows(); ++r) {
                const Cell& c = raw.rows[r][fi];
                if (st.zero_variance) {
                    ds.x(r, base) = 0.0;
                } else {
                    const double v = c.missing ? st.median : c.num;
                    ds.x(r, base) = (v - st.mean) / st.stddev;
                }
            }
        } else {
            const auto& cm = stats.categorical[cat_i++];
            for (std::size_t r = 0; r < raw.n_rows(); ++r) {
                const Cell& c = raw.rows[r][fi];
                std::size_t hot = cm.columns.size() - 1; // "<missing>"
                if (!c.missing) {
                    for (std::size_t k = 0; k + 1 < cm.columns.size(); ++k)
                        if (cm.columns[k] == c.cat) { hot = k; break; }
                }
                ds.x(r, base + hot) = 1.0;
            }
        }
    }

    ds.validate();
    return {std::move(ds), std::move(stats)};
}

/// Zeroes every encoded column that came from `feature_name`, across all
/// rows. Shape, names and labels stay as they are.
inline Dataset zero_feature(const Dataset& ds, std::string_view feature_name) {
    const auto cols = ds.columns_of_feature(feature_name);
    if (cols.empty())
        throw std::runtime_error("zero_feature: unknown feature '" + std::string(feature_name) + "'");
    Dataset out = ds;
    for (std::size_t r = 0; r < out.n_rows(); ++r)
        for (std::size_t c : cols) out.x(r, c) = 0.0;
    return out;
}

} // namespace fedul::data
