#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bycs/types.hpp"

namespace bycs {

namespace detail {

inline bool is_blank_line(const std::string& line) {
    for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r')
            return false;
    return true;
}

inline json parse_jsonl_line(const std::string& line, const std::string& path,
                             std::size_t lineno) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
        throw validation_error(path + ":" + std::to_string(lineno) +
                               ": malformed JSONL record");
    return j;
}

inline std::string require_string(const json& j, const char* key,
                                  const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw validation_error(where + ": missing or non-string \"" + key + "\"");
    return j.at(key).get<std::string>();
}

inline std::optional<std::vector<double>> read_embedding(const json& j,
                                                         const std::string& where) {
    if (!j.contains("embedding"))
        return std::nullopt;
    const json& e = j.at("embedding");
    if (!e.is_array())
        throw validation_error(where + ": \"embedding\" must be an array of numbers");
    std::vector<double> v;
    v.reserve(e.size());
    for (const auto& x : e) {
        if (!x.is_number())
            throw validation_error(where + ": \"embedding\" must be an array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

} // namespace detail

/// Loads a JSONL datastore. Structural problems (malformed lines, duplicate
/// ids, inconsistent embedding dimensions) are hard errors naming the line;
/// soft invariant violations are left to validate_datastore.
inline Datastore load_datastore(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw validation_error("cannot open datastore file: " + path.string());
    Datastore ds;
    ds.name = path.stem().string();
    std::unordered_map<std::string, std::size_t> seen; // id -> first line
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::is_blank_line(line))
            continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        json j = detail::parse_jsonl_line(line, path.string(), lineno);
        Example ex;
        ex.id = detail::require_string(j, "id", where);
        ex.input = detail::require_string(j, "input", where);
        ex.label = detail::require_string(j, "label", where);
        ex.embedding = detail::read_embedding(j, where);
        if (j.contains("meta")) {
            if (!j.at("meta").is_object())
                throw validation_error(where + ": \"meta\" must be an object");
            for (const auto& item : j.at("meta").items()) {
                if (!item.value().is_string())
                    throw validation_error(where + ": \"meta\" values must be strings");
                ex.meta[item.key()] = item.value().get<std::string>();
            }
        }
        if (auto it = seen.find(ex.id); it != seen.end())
            throw validation_error(where + ": duplicate id \"" + ex.id +
                                   "\" (first seen on line " +
                                   std::to_string(it->second) + ")");
        seen.emplace(ex.id, lineno);
        if (ex.embedding) {
            if (!ds.embedding_dim) {
                ds.embedding_dim = ex.embedding->size();
            } else if (ex.embedding->size() != *ds.embedding_dim) {
                throw validation_error(
                    where + ": embedding dimension mismatch for \"" + ex.id +
                    "\": got " + std::to_string(ex.embedding->size()) +
                    ", datastore uses " + std::to_string(*ds.embedding_dim));
            }
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

struct Violation {
    std::string record_id;
    std::string rule;
};

/// Pure invariant check; violations are data, not failures.
inline std::vector<Violation> validate_datastore(const Datastore& ds) {
    std::vector<Violation> report;
    std::unordered_set<std::string> ids;
    for (const auto& ex : ds.examples) {
        if (ex.id.empty())
            report.push_back({ex.id, "empty id"});
        else if (!ids.insert(ex.id).second)
            report.push_back({ex.id, "duplicate id"});
        if (ex.label.empty())
            report.push_back({ex.id, "empty label"});
        if (ex.embedding && ds.embedding_dim &&
            ex.embedding->size() != *ds.embedding_dim)
            report.push_back({ex.id, "embedding length " +
                                         std::to_string(ex.embedding->size()) +
                                         " != declared dimension " +
                                         std::to_string(*ds.embedding_dim)});
    }
    return report;
}

inline json example_to_json(const Example& ex) {
    json j{{"id", ex.id}, {"input", ex.input}, {"label", ex.label}};
    if (ex.embedding)
        j["embedding"] = *ex.embedding;
    if (!ex.meta.empty())
        j["meta"] = ex.meta;
    return j;
}

inline void write_datastore(const Datastore& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw validation_error("cannot open datastore file for writing: " + path.string());
    for (const auto& ex : ds.examples)
        out << example_to_json(ex).dump() << '\n';
    if (!out)
        throw validation_error("write failed: " + path.string());
}

inline std::vector<TestInstance> load_testset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw validation_error("cannot open testset file: " + path.string());
    std::vector<TestInstance> tests;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::is_blank_line(line))
            continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        json j = detail::parse_jsonl_line(line, path.string(), lineno);
        TestInstance t;
        t.id = detail::require_string(j, "id", where);
        t.input = detail::require_string(j, "input", where);
        if (t.id.empty())
            throw validation_error(where + ": empty id");
        if (j.contains("reference")) {
            if (!j.at("reference").is_string())
                throw validation_error(where + ": \"reference\" must be a string");
            t.reference = j.at("reference").get<std::string>();
        }
        t.embedding = detail::read_embedding(j, where);
        if (!ids.insert(t.id).second)
            throw validation_error(where + ": duplicate id \"" + t.id + "\"");
        tests.push_back(std::move(t));
    }
    return tests;
}

/// Test embeddings must match the datastore's dimension before any
/// embedding-based ranking runs.
inline void check_embedding_dims(const Datastore& ds,
                                 const std::vector<TestInstance>& tests) {
    if (!ds.embedding_dim)
        return;
    for (const auto& t : tests)
        if (t.embedding && t.embedding->size() != *ds.embedding_dim)
            throw validation_error("test \"" + t.id + "\" has embedding length " +
                                   std::to_string(t.embedding->size()) +
                                   ", datastore uses " +
                                   std::to_string(*ds.embedding_dim));
}

inline void write_testset(const std::vector<TestInstance>& tests,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw validation_error("cannot open testset file for writing: " + path.string());
    for (const auto& t : tests) {
        json j{{"id", t.id}, {"input", t.input}};
        if (t.reference)
            j["reference"] = *t.reference;
        if (t.embedding)
            j["embedding"] = *t.embedding;
        out << j.dump() << '\n';
    }
    if (!out)
        throw validation_error("write failed: " + path.string());
}

} // namespace bycs
