// schema.hpp - dataset schema descriptors
#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fedul::data {

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    std::vector<std::string> categories; // empty for numeric

    bool operator==(const FeatureSpec&) const = default;
};

/// Declares how a raw table is typed: the ordered feature columns, the label
/// column, and which label value counts as the positive class.
struct Schema {
    std::vector<FeatureSpec> features;
    std::string label_column;
    std::string positive_label;

    bool operator==(const Schema&) const = default;

    const FeatureSpec* find(std::string_view name) const {
        for (const auto& f : features)
            if (f.name == name) return &f;
        return nullptr;
    }

    void validate() const {
        if (features.empty()) throw std::runtime_error("schema: no features");
        std::set<std::string> seen;
        for (const auto& f : features) {
            if (!seen.insert(f.name).second)
                throw std::runtime_error("schema: duplicate feature name '" + f.name + "'");
            if (f.kind == FeatureKind::categorical && f.categories.size() < 2)
                throw std::runtime_error("schema: categorical feature '" + f.name +
                                         "' needs at least 2 categories");
            if (f.kind == FeatureKind::numeric && !f.categories.empty())
                throw std::runtime_error("schema: numeric feature '" + f.name +
                                         "' must not list categories");
        }
        if (label_column.empty()) throw std::runtime_error("schema: missing label column");
        if (seen.count(label_column))
            throw std::runtime_error("schema: label column '" + label_column +
                                     "' is also a feature");
        if (positive_label.empty()) throw std::runtime_error("schema: missing positive label");
    }
};

/// On-disk descriptor: the schema plus per-dataset metadata (which features
/// are sensible unlearning targets, free-form notes).
struct SchemaFile {
    Schema schema;
    std::vector<std::string> unlearn_candidates;
    std::string notes;

    void validate() const {
        schema.validate();
        for (const auto& c : unlearn_candidates)
            if (!schema.find(c))
                throw std::runtime_error("schema: unlearn candidate '" + c +
                                         "' is not a feature");
    }
};

inline nlohmann::json schema_to_json(const SchemaFile& sf) {
    nlohmann::json j;
    j["features"] = nlohmann::json::array();
    for (const auto& f : sf.schema.features) {
        nlohmann::json jf;
        jf["name"] = f.name;
        jf["kind"] = f.kind == FeatureKind::numeric ? "numeric" : "categorical";
        if (f.kind == FeatureKind::categorical) jf["categories"] = f.categories;
        j["features"].push_back(jf);
    }
    j["label"] = sf.schema.label_column;
    j["positive_label"] = sf.schema.positive_label;
    if (!sf.unlearn_candidates.empty()) j["unlearn_candidates"] = sf.unlearn_candidates;
    if (!sf.notes.empty()) j["notes"] = sf.notes;
    return j;
}

inline SchemaFile schema_from_json(const nlohmann::json& j) {
    SchemaFile sf;
    for (const auto& jf : j.at("features")) {
        FeatureSpec f;
        f.name = jf.at("name").get<std::string>();
        const std::string kind = jf.at("kind").get<std::string>();
        if (kind == "numeric") {
            f.kind = FeatureKind::numeric;
        } else if (kind == "categorical") {
            f.kind = FeatureKind::categorical;
            f.categories = jf.at("categories").get<std::vector<std::string>>();
        } else {
            throw std::runtime_error("schema: unknown feature kind '" + kind + "'");
        }
        sf.schema.features.push_back(std::move(f));
    }
    sf.schema.label_column = j.at("label").get<std::string>();
    sf.schema.positive_label = j.at("positive_label").get<std::string>();
    if (j.contains("unlearn_candidates"))
        sf.unlearn_candidates = j.at("unlearn_candidates").get<std::vector<std::string>>();
    if (j.contains("notes")) sf.notes = j.at("notes").get<std::string>();
    sf.validate();
    return sf;
}

inline SchemaFile load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("malformed schema file " + path + ": " + e.what());
    }
    return schema_from_json(j);
}

inline void save_schema(const SchemaFile& sf, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write schema file: " + path);
    out << schema_to_json(sf).dump(2) << '\n';
}

} // namespace fedul::data
