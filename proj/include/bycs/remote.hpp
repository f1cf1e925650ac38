#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

#include "bycs/model.hpp"

namespace bycs {

/// OpenAI-style chat-completions backend. One POST per call, greedy decoding
/// (temperature 0) so repeated calls stay cache-consistent. Transport
/// failures are retried up to three times with exponential backoff; an HTTP
/// error status is terminal. The bearer token comes from BYCS_API_KEY.
class RemoteChatClient : public ModelClient {
public:
    explicit RemoteChatClient(ModelSpec spec) : ModelClient(std::move(spec)) {
        parse_endpoint(this->spec().endpoint);
        if (const char* key = std::getenv("BYCS_API_KEY"))
            api_key_ = key;
    }

    static constexpr int kMaxRetries = 3;

protected:
    std::string infer_raw(const std::string& prompt) override {
        json body{{"model", spec().model_name},
                  {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                  {"temperature", 0}};
        if (!spec().decode_option.empty())
            body["decode_option"] = spec().decode_option;
        const std::string payload = body.dump();

        httplib::Headers headers;
        if (!api_key_.empty())
            headers.emplace("Authorization", "Bearer " + api_key_);

        int attempts = 0;
        std::chrono::milliseconds delay{100};
        for (;;) {
            ++attempts;
            httplib::Client client(origin_);
            client.set_connection_timeout(10, 0);
            client.set_read_timeout(120, 0);
            auto res = client.Post(base_path_ + "/chat/completions", headers,
                                   payload, "application/json");
            if (!res) {
                if (attempts > kMaxRetries)
                    throw backend_error("remote transport failure against " + origin_ +
                                            ": " + httplib::to_string(res.error()) +
                                            " (attempts=" + std::to_string(attempts) + ")",
                                        attempts);
                std::this_thread::sleep_for(delay);
                delay *= 2;
                continue;
            }
            if (res->status < 200 || res->status >= 300)
                throw backend_error("remote backend returned HTTP " +
                                        std::to_string(res->status) + ": " + res->body,
                                    attempts);
            return extract_content(res->body);
        }
    }

private:
    void parse_endpoint(const std::string& endpoint) {
        const std::size_t scheme = endpoint.find("://");
        if (scheme == std::string::npos)
            throw validation_error("remote endpoint must include a scheme: " + endpoint);
        const std::size_t path = endpoint.find('/', scheme + 3);
        if (path == std::string::npos) {
            origin_ = endpoint;
        } else {
            origin_ = endpoint.substr(0, path);
            base_path_ = endpoint.substr(path);
            while (!base_path_.empty() && base_path_.back() == '/')
                base_path_.pop_back();
        }
    }

    static std::string extract_content(const std::string& body) {
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded())
            throw backend_error("remote backend returned non-JSON body");
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& ex) {
            throw backend_error(std::string("unexpected chat-completion shape: ") +
                                ex.what());
        }
    }

    std::string origin_;
    std::string base_path_;
    std::string api_key_;
};

/// Builds the client matching a spec's kind.
inline std::shared_ptr<ModelClient> make_model(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::remote_chat:
            return std::make_shared<RemoteChatClient>(spec);
        case ModelKind::replay_log:
            return std::make_shared<ReplayClient>(spec, ReplayLog::load(spec.path));
        case ModelKind::cluster_oracle:
            return std::make_shared<ClusterOracleClient>(spec);
    }
    throw validation_error("unknown model kind");
}

inline ModelFactory default_model_factory() {
    return [](const ModelSpec& spec) { return make_model(spec); };
}

} // namespace bycs
