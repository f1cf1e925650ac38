#pragma once

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bycs/cache.hpp"
#include "bycs/detail/hash.hpp"
#include "bycs/prompt.hpp"
#include "bycs/types.hpp"

namespace bycs {

/// Uniform inference interface. infer() answers a rendered prompt and bumps
/// the call counter; cache hits never reach infer() and so are never counted.
class ModelClient {
public:
    explicit ModelClient(ModelSpec spec) : spec_(std::move(spec)) {}
    virtual ~ModelClient() = default;

    ModelClient(const ModelClient&) = delete;
    ModelClient& operator=(const ModelClient&) = delete;

    std::string infer(const std::string& prompt) {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return infer_raw(prompt);
    }

    std::size_t call_count() const { return calls_.load(std::memory_order_relaxed); }

    const ModelSpec& spec() const { return spec_; }
    const std::string& id() const { return spec_.id; }

protected:
    virtual std::string infer_raw(const std::string& prompt) = 0;

private:
    ModelSpec spec_;
    std::atomic<std::size_t> calls_{0};
};

// --- synthetic cluster oracle -------------------------------------------

/// Deterministic toy backend for end-to-end verification. Inputs follow the
/// grammar "q:<cluster>:<payload tokens...>" (payload runs to end of line)
/// and labels "a:<cluster>:<payload>". The answer to a prompt depends only
/// on whether some in-context example input shares the query's cluster:
/// if so, the query's own matching label is emitted; otherwise the cluster
/// field is replaced with "?". With noise_p > 0 a coin seeded by the prompt
/// hash decides, per call, whether the final output token is replaced by
/// the corruption token — deterministic per prompt, independent across
/// prompts.
class ClusterOracleClient : public ModelClient {
public:
    static constexpr const char* kCorruptionToken = "unk";

    explicit ClusterOracleClient(ModelSpec spec) : ModelClient(std::move(spec)) {}

protected:
    std::string infer_raw(const std::string& prompt) override {
        struct Occurrence {
            std::string cluster;
            std::string payload;
        };
        std::vector<Occurrence> occurrences;
        for (std::size_t i = 0; i + 1 < prompt.size(); ++i) {
            if (prompt[i] != 'q' || prompt[i + 1] != ':')
                continue;
            if (i > 0 && (std::isalnum(static_cast<unsigned char>(prompt[i - 1])) ||
                          prompt[i - 1] == '_'))
                continue;
            const std::size_t cluster_begin = i + 2;
            std::size_t j = cluster_begin;
            while (j < prompt.size() && prompt[j] != ':' && prompt[j] != '\n' &&
                   prompt[j] != ' ')
                ++j;
            if (j >= prompt.size() || prompt[j] != ':' || j == cluster_begin)
                continue;
            const std::size_t payload_begin = j + 1;
            std::size_t end = prompt.find('\n', payload_begin);
            if (end == std::string::npos)
                end = prompt.size();
            occurrences.push_back({prompt.substr(cluster_begin, j - cluster_begin),
                                   prompt.substr(payload_begin, end - payload_begin)});
            i = end;
        }
        if (occurrences.empty())
            throw backend_error("cluster oracle: prompt contains no \"q:<cluster>:\" input");
        const Occurrence& query = occurrences.back();
        bool same_cluster = false;
        for (std::size_t i = 0; i + 1 < occurrences.size(); ++i)
            if (occurrences[i].cluster == query.cluster)
                same_cluster = true;
        std::string out = "a:" + (same_cluster ? query.cluster : std::string("?")) +
                          ":" + query.payload;
        if (spec().noise_p > 0.0 && corruption_coin(prompt))
            corrupt_final_token(out);
        return out;
    }

private:
    bool corruption_coin(const std::string& prompt) const {
        const std::string keyed = std::to_string(spec().seed) + "\n" + prompt;
        const std::uint64_t h = detail::sha256_prefix64(keyed);
        const double u = static_cast<double>(h) * 0x1.0p-64;
        return u < spec().noise_p;
    }

    static void corrupt_final_token(std::string& text) {
        std::size_t end = text.size();
        while (end > 0 && text[end - 1] == ' ')
            --end;
        std::size_t begin = end;
        while (begin > 0 && text[begin - 1] != ' ')
            --begin;
        text = text.substr(0, begin) + kCorruptionToken;
    }
};

// --- replay log -----------------------------------------------------------

/// Prompt-hash -> output map, persisted as JSONL of
/// {"prompt_sha256": hex, "output": str}. Conflicting duplicates are
/// rejected at load; identical duplicates collapse.
class ReplayLog {
public:
    ReplayLog() = default;

    static std::shared_ptr<ReplayLog> load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw validation_error("cannot open replay log: " + path.string());
        auto log = std::make_shared<ReplayLog>();
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty())
                continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("prompt_sha256") ||
                !j.contains("output"))
                throw validation_error(path.string() + ":" + std::to_string(lineno) +
                                       ": malformed replay record");
            log->record_hash(j.at("prompt_sha256").get<std::string>(),
                             j.at("output").get<std::string>());
        }
        return log;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out)
            throw validation_error("cannot open replay log for writing: " + path.string());
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& hash : order_)
            out << json{{"prompt_sha256", hash}, {"output", entries_.at(hash)}}.dump()
                << '\n';
        if (!out)
            throw validation_error("replay log write failed: " + path.string());
    }

    void record(const std::string& prompt, const std::string& output) {
        record_hash(detail::sha256_hex(prompt), output);
    }

    void record_hash(const std::string& hash, const std::string& output) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(hash);
        if (it != entries_.end()) {
            if (it->second != output)
                throw backend_error("replay log conflict for prompt hash " + hash);
            return;
        }
        entries_.emplace(hash, output);
        order_.push_back(hash);
    }

    std::optional<std::string> find(const std::string& prompt) const {
        const std::string hash = detail::sha256_hex(prompt);
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(hash);
        if (it == entries_.end())
            return std::nullopt;
        return it->second;
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> entries_;
    std::vector<std::string> order_; // insertion order, for stable save()
};

class ReplayClient : public ModelClient {
public:
    ReplayClient(ModelSpec spec, std::shared_ptr<const ReplayLog> log)
        : ModelClient(std::move(spec)), log_(std::move(log)) {}

protected:
    std::string infer_raw(const std::string& prompt) override {
        if (auto hit = log_->find(prompt))
            return *hit;
        throw backend_error("replay miss for prompt sha256 " +
                            detail::sha256_hex(prompt));
    }

private:
    std::shared_ptr<const ReplayLog> log_;
};

/// Wraps another backend and logs every (prompt, output) pair, for building
/// replay fixtures from live sessions.
class RecordingClient : public ModelClient {
public:
    RecordingClient(ModelSpec spec, std::shared_ptr<ModelClient> inner,
                    std::shared_ptr<ReplayLog> log)
        : ModelClient(std::move(spec)), inner_(std::move(inner)), log_(std::move(log)) {}

protected:
    std::string infer_raw(const std::string& prompt) override {
        const std::string output = inner_->infer(prompt);
        log_->record(prompt, output);
        return output;
    }

private:
    std::shared_ptr<ModelClient> inner_;
    std::shared_ptr<ReplayLog> log_;
};

// --- inverse inference -----------------------------------------------------

/// Builds a client from a spec; the harness takes one of these so tests can
/// swap in recording or fake backends.
using ModelFactory = std::function<std::shared_ptr<ModelClient>(const ModelSpec&)>;

struct InverseQuery {
    std::string test_id;
    std::string test_input;     // X
    std::string hypothesis;     // Y-hat
    std::string example_id;
    std::string candidate_input;
};

struct InverseResult {
    std::string output;
    bool cached = false;
};

/// Probes one candidate: the (test input, hypothesis) pair is the sole
/// in-context example and the candidate input is the query. Byte-equivalent
/// to infer(render_prompt(tmpl, [(X, Y-hat)], candidate_input)). Results are
/// persisted through the cache when one is supplied; a cache hit returns
/// without touching the backend.
inline InverseResult inverse_infer(ModelClient& model, const PromptTemplate& tmpl,
                                   const InverseQuery& q,
                                   InverseCache* cache = nullptr) {
    CacheKey key;
    if (cache) {
        key = CacheKey{model.id(),       tmpl.id(),
                       model.spec().decode_option, q.test_id,
                       hypothesis_hash(q.hypothesis), q.example_id};
        if (auto hit = cache->lookup(key))
            return {*hit, true};
    }
    const std::string prompt =
        render_prompt(tmpl, {{q.test_input, q.hypothesis}}, q.candidate_input);
    const std::string output = model.infer(prompt);
    if (cache)
        cache->store(key, output);
    return {output, false};
}

} // namespace bycs
