// table.hpp - typed raw tables and CSV I/O
#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedul/schema.hpp"

namespace fedul::data {

/// One typed cell. Numeric features fill `num`, categoricals fill `cat`;
/// `missing` marks empty / "?" / "NA" cells for later imputation.
struct Cell {
    bool missing = false;
    double num = 0.0;
    std::string cat;
};

/// Rows of typed feature cells plus the already-binarized label column.
/// Column order follows the schema, not the file header.
struct RawTable {
    std::vector<std::string> feature_names;
    std::vector<std::vector<Cell>> rows;
    std::vector<int> labels; // {0,1}, one per row

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_features() const { return feature_names.size(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

/// Splits one CSV line. Handles double-quoted fields with "" escapes;
/// unquoted fields are trimmed.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(trim(field));
    return out;
}

inline bool is_missing_token(const std::string& s) {
    return s.empty() || s == "?" || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

inline double parse_number(const std::string& s, std::size_t row, const std::string& col) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
        throw std::runtime_error("row " + std::to_string(row) + ": unparseable numeric cell '" +
                                 s + "' in column '" + col + "'");
    return v;
}

} // namespace detail

/// Loads a CSV with a header row against a schema. The header must contain
/// every schema feature plus the label column; extra columns are ignored
/// (the hospital-readmission descriptor deliberately uses a subset).
/// Row numbers in error messages are 1-based data rows.
inline RawTable load_table(const std::string& path, const Schema& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) throw std::runtime_error("empty dataset file: " + path);
    if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
    const auto header = detail::split_csv_line(header_line);

    auto column_of = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("header mismatch in " + path + ": missing column '" + name + "'");
    };

    std::vector<std::size_t> feature_cols;
    feature_cols.reserve(schema.features.size());
    for (const auto& f : schema.features) feature_cols.push_back(column_of(f.name));
    const std::size_t label_col = column_of(schema.label_column);

    RawTable table;
    for (const auto& f : schema.features) table.feature_names.push_back(f.name);

    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row " + std::to_string(row_no) + ": expected " +
                                     std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()));

        std::vector<Cell> row;
        row.reserve(schema.features.size());
        for (std::size_t fi = 0; fi < schema.features.size(); ++fi) {
            const auto& spec = schema.features[fi];
            const std::string& text = cells[feature_cols[fi]];
            Cell cell;
            if (detail::is_missing_token(text)) {
                cell.missing = true;
            } else if (spec.kind == FeatureKind::numeric) {
                cell.num = detail::parse_number(text, row_no, spec.name);
            } else {
                bool known = false;
                for (const auto& c : spec.categories)
                    if (c == text) { known = true; break; }
                if (!known)
                    throw std::runtime_error("row " + std::to_string(row_no) +
                                             ": unknown category '" + text + "' for feature '" +
                                             spec.name + "'");
                cell.cat = text;
            }
            row.push_back(std::move(cell));
        }

        const std::string& label_text = cells[label_col];
        if (detail::is_missing_token(label_text))
            throw std::runtime_error("row " + std::to_string(row_no) + ": missing label cell");
        table.labels.push_back(label_text == schema.positive_label ? 1 : 0);
        table.rows.push_back(std::move(row));
    }
    return table;
}

/// Writes a table back out as CSV (used by the synthetic-data tooling).
/// `negative_text` is the label written for rows with label 0.
inline void save_table(const RawTable& table, const Schema& schema, const std::string& path,
                       const std::string& negative_text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);

    for (std::size_t i = 0; i < table.feature_names.size(); ++i)
        out << table.feature_names[i] << ',';
    out << schema.label_column << '\n';

    char buf[64];
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        for (std::size_t c = 0; c < table.n_features(); ++c) {
            const Cell& cell = table.rows[r][c];
            if (cell.missing) {
                // empty field
            } else if (schema.features[c].kind == FeatureKind::numeric) {
                std::snprintf(buf, sizeof buf, "%.10g", cell.num);
                out << buf;
            } else {
                out << cell.cat;
            }
            out << ',';
        }
        out << (table.labels[r] == 1 ? schema.positive_label : negative_text) << '\n';
    }
}

} // namespace fedul::data
