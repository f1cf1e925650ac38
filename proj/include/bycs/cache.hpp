#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "bycs/detail/hash.hpp"
#include "bycs/types.hpp"

namespace bycs {

/// Identifies one inverse-inference result. Two calls with equal keys must
/// produce equal outputs; the hypothesis enters through its hash because its
/// text materially changes the probe.
struct CacheKey {
    std::string model_id;
    std::string template_id;
    std::string decode_option;
    std::string test_id;
    std::string hypothesis_sha256;
    std::string example_id;

    json to_json() const {
        return json{{"model_id", model_id},
                    {"template_id", template_id},
                    {"decode_option", decode_option},
                    {"test_id", test_id},
                    {"hypothesis_sha256", hypothesis_sha256},
                    {"example_id", example_id}};
    }

    // nlohmann objects serialize with sorted keys, so this is canonical.
    std::string canonical() const { return to_json().dump(); }
};

namespace detail {

inline std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

/// Append-only inverse-inference cache: one JSONL line per entry, full
/// in-memory index. Re-inserting an identical (key, value) pair is a no-op;
/// a different value under an existing key is a conflict, which signals a
/// non-deterministic backend.
class InverseCache {
public:
    InverseCache() = default;

    explicit InverseCache(const std::filesystem::path& path) { open(path); }

    void open(const std::filesystem::path& path) {
        std::lock_guard<std::mutex> lock(mutex_);
        path_ = path;
        index_.clear();
        if (std::filesystem::exists(path)) {
            std::ifstream in(path);
            if (!in)
                throw error("cannot open cache file: " + path.string());
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.empty())
                    continue;
                json j = json::parse(line, nullptr, false);
                if (j.is_discarded() || !j.is_object() || !j.contains("key") ||
                    !j.contains("value"))
                    throw validation_error(path.string() + ":" +
                                           std::to_string(lineno) +
                                           ": malformed cache line");
                index_[j.at("key").dump()] = j.at("value").get<std::string>();
            }
        }
        out_.open(path, std::ios::app);
        if (!out_)
            throw error("cannot open cache file for append: " + path.string());
    }

    bool is_open() const { return out_.is_open(); }

    std::optional<std::string> lookup(const CacheKey& key) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = index_.find(key.canonical());
        if (it == index_.end())
            return std::nullopt;
        return it->second;
    }

    void store(const CacheKey& key, const std::string& value) {
        std::lock_guard<std::mutex> lock(mutex_);
        const std::string canon = key.canonical();
        auto it = index_.find(canon);
        if (it != index_.end()) {
            if (it->second != value)
                throw backend_error("cache conflict for key " + canon +
                                    ": stored value differs from new value "
                                    "(non-deterministic backend?)");
            return; // idempotent re-insert, no duplicate row
        }
        json line{{"key", key.to_json()},
                  {"value", value},
                  {"ts", detail::iso8601_now()}};
        out_ << line.dump() << '\n';
        out_.flush();
        if (!out_)
            throw error("cache write failed: " + path_.string());
        index_.emplace(canon, value);
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return index_.size();
    }

private:
    mutable std::mutex mutex_;
    std::filesystem::path path_;
    std::unordered_map<std::string, std::string> index_;
    std::ofstream out_;
};

inline std::string hypothesis_hash(const std::string& hypothesis_text) {
    return detail::sha256_hex(hypothesis_text);
}

} // namespace bycs
