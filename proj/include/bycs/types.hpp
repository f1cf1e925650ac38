#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bycs/errors.hpp"

namespace bycs {

using json = nlohmann::json;

/// One datastore record: an input payload paired with its ground-truth label.
struct Example {
    std::string id;
    std::string input;
    std::string label;
    std::optional<std::vector<double>> embedding;
    std::map<std::string, std::string> meta;
};

/// Ordered collection of candidate in-context examples. Immutable after load.
struct Datastore {
    std::vector<Example> examples;
    std::optional<std::size_t> embedding_dim;
    std::string name;

    std::size_t size() const { return examples.size(); }

    const Example* find(const std::string& id) const {
        for (const auto& e : examples)
            if (e.id == id)
                return &e;
        return nullptr;
    }
};

/// A query to answer: input payload plus optional reference label.
struct TestInstance {
    std::string id;
    std::string input;
    std::optional<std::string> reference;
    std::optional<std::vector<double>> embedding;
};

enum class Provenance { default_decode, random_icl, baseline_icl, oracle };

/// First-round prediction for a test input, used in place of the
/// unavailable ground truth when probing candidates.
struct Hypothesis {
    std::string test_id;
    std::string text;
    Provenance provenance = Provenance::default_decode;
};

/// A pre-selected candidate annotated with its probe output and score.
struct ScoredCandidate {
    std::string example_id;
    std::string inverse_output;
    double score = 0.0;
    std::size_t preselect_rank = 0;
};

enum class Method { random, knn, bm25, bycs, bycs_fast, oracle_bycs };
enum class PreselectAlgo { knn, bm25 };
enum class FirstRound { default_decode, random_icl, baseline_icl, oracle };
enum class Similarity { jaccard_set, jaccard_bag, embedding_distance };
enum class TokenizerMode { whitespace_word, character, cjk_aware };
enum class PromptOrder { score_descending, score_ascending };
enum class ModelKind { remote_chat, replay_log, cluster_oracle };

/// Static description of an inference backend; runtime state (call counts,
/// connections) lives in the client built from it.
struct ModelSpec {
    std::string id;
    ModelKind kind = ModelKind::cluster_oracle;
    std::string endpoint;                 // remote_chat
    std::string model_name;               // remote_chat
    std::string path;                     // replay_log
    std::string decode_option;
    double noise_p = 0.0;                 // cluster_oracle
    std::uint64_t seed = 0;               // cluster_oracle corruption coin
};

/// Every knob of the selection pipeline.
struct SelectionConfig {
    Method method = Method::bycs;
    std::size_t k = 1;
    std::size_t preselect_n = 2;          // defaults to 2*k when absent in JSON
    PreselectAlgo preselect_algo = PreselectAlgo::knn;
    FirstRound first_round = FirstRound::default_decode;
    std::size_t first_round_k = 1;        // k' for random_icl / baseline_icl
    Similarity similarity = Similarity::jaccard_set;
    TokenizerMode tokenizer = TokenizerMode::whitespace_word;
    std::string template_id = "qa";
    std::optional<ModelSpec> inverse_model;
    std::optional<ModelSpec> inference_model;
    std::uint64_t seed = 0;
    std::string decode_option;
    PromptOrder prompt_order = PromptOrder::score_descending;
    int parallelism = 1;                  // bound on concurrent probe calls
    std::optional<json> template_override; // inline template object, optional
};

// --- enum <-> string ---------------------------------------------------

namespace detail {

template <typename Enum>
struct EnumName {
    Enum value;
    const char* name;
};

template <typename Enum, std::size_t N>
std::string enum_to_string(const EnumName<Enum> (&table)[N], Enum v) {
    for (const auto& entry : table)
        if (entry.value == v)
            return entry.name;
    return "?";
}

template <typename Enum, std::size_t N>
Enum enum_from_string(const EnumName<Enum> (&table)[N], const std::string& s,
                      const char* what) {
    for (const auto& entry : table)
        if (s == entry.name)
            return entry.value;
    throw validation_error(std::string("unknown ") + what + ": \"" + s + "\"");
}

inline constexpr EnumName<Method> method_names[] = {
    {Method::random, "random"},       {Method::knn, "knn"},
    {Method::bm25, "bm25"},           {Method::bycs, "bycs"},
    {Method::bycs_fast, "bycs_fast"}, {Method::oracle_bycs, "oracle_bycs"},
};
inline constexpr EnumName<PreselectAlgo> preselect_names[] = {
    {PreselectAlgo::knn, "knn"}, {PreselectAlgo::bm25, "bm25"},
};
inline constexpr EnumName<FirstRound> first_round_names[] = {
    {FirstRound::default_decode, "default"},
    {FirstRound::random_icl, "random_icl"},
    {FirstRound::baseline_icl, "baseline_icl"},
    {FirstRound::oracle, "oracle"},
};
inline constexpr EnumName<Provenance> provenance_names[] = {
    {Provenance::default_decode, "default"},
    {Provenance::random_icl, "random_icl"},
    {Provenance::baseline_icl, "baseline_icl"},
    {Provenance::oracle, "oracle"},
};
inline constexpr EnumName<Similarity> similarity_names[] = {
    {Similarity::jaccard_set, "jaccard_set"},
    {Similarity::jaccard_bag, "jaccard_bag"},
    {Similarity::embedding_distance, "embedding_distance"},
};
inline constexpr EnumName<TokenizerMode> tokenizer_names[] = {
    {TokenizerMode::whitespace_word, "whitespace_word"},
    {TokenizerMode::character, "character"},
    {TokenizerMode::cjk_aware, "cjk_aware"},
};
inline constexpr EnumName<PromptOrder> prompt_order_names[] = {
    {PromptOrder::score_descending, "score_descending"},
    {PromptOrder::score_ascending, "score_ascending"},
};
inline constexpr EnumName<ModelKind> model_kind_names[] = {
    {ModelKind::remote_chat, "remote_chat"},
    {ModelKind::replay_log, "replay_log"},
    {ModelKind::cluster_oracle, "cluster_oracle"},
};

} // namespace detail

inline std::string to_string(Method v) { return detail::enum_to_string(detail::method_names, v); }
inline std::string to_string(PreselectAlgo v) { return detail::enum_to_string(detail::preselect_names, v); }
inline std::string to_string(FirstRound v) { return detail::enum_to_string(detail::first_round_names, v); }
inline std::string to_string(Provenance v) { return detail::enum_to_string(detail::provenance_names, v); }
inline std::string to_string(Similarity v) { return detail::enum_to_string(detail::similarity_names, v); }
inline std::string to_string(TokenizerMode v) { return detail::enum_to_string(detail::tokenizer_names, v); }
inline std::string to_string(PromptOrder v) { return detail::enum_to_string(detail::prompt_order_names, v); }
inline std::string to_string(ModelKind v) { return detail::enum_to_string(detail::model_kind_names, v); }

inline Method method_from_string(const std::string& s) { return detail::enum_from_string(detail::method_names, s, "method"); }
inline PreselectAlgo preselect_algo_from_string(const std::string& s) { return detail::enum_from_string(detail::preselect_names, s, "preselect_algo"); }
inline FirstRound first_round_from_string(const std::string& s) { return detail::enum_from_string(detail::first_round_names, s, "first_round"); }
inline Provenance provenance_from_string(const std::string& s) { return detail::enum_from_string(detail::provenance_names, s, "provenance"); }
inline Similarity similarity_from_string(const std::string& s) { return detail::enum_from_string(detail::similarity_names, s, "similarity"); }
inline TokenizerMode tokenizer_from_string(const std::string& s) { return detail::enum_from_string(detail::tokenizer_names, s, "tokenizer"); }
inline PromptOrder prompt_order_from_string(const std::string& s) { return detail::enum_from_string(detail::prompt_order_names, s, "prompt_order"); }
inline ModelKind model_kind_from_string(const std::string& s) { return detail::enum_from_string(detail::model_kind_names, s, "model kind"); }

// --- config JSON --------------------------------------------------------

namespace detail {

inline void require_object(const json& j, const char* what) {
    if (!j.is_object())
        throw validation_error(std::string(what) + " must be a JSON object");
}

inline void check_known_keys(const json& j, std::initializer_list<const char*> known,
                             const char* what) {
    for (const auto& item : j.items()) {
        bool found = false;
        for (const char* k : known)
            if (item.key() == k) {
                found = true;
                break;
            }
        if (!found)
            throw validation_error(std::string("unknown field \"") + item.key() +
                                   "\" in " + what);
    }
}

} // namespace detail

inline ModelSpec model_spec_from_json(const json& j) {
    detail::require_object(j, "model spec");
    detail::check_known_keys(j,
        {"id", "kind", "endpoint", "model_name", "path", "decode_option",
         "noise_p", "seed"},
        "model spec");
    ModelSpec spec;
    spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
    spec.id = j.value("id", to_string(spec.kind));
    spec.endpoint = j.value("endpoint", "");
    spec.model_name = j.value("model_name", "");
    spec.path = j.value("path", "");
    spec.decode_option = j.value("decode_option", "");
    spec.noise_p = j.value("noise_p", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    if (spec.kind == ModelKind::remote_chat &&
        (spec.endpoint.empty() || spec.model_name.empty()))
        throw validation_error("remote_chat model requires endpoint and model_name");
    if (spec.kind == ModelKind::replay_log && spec.path.empty())
        throw validation_error("replay_log model requires path");
    if (spec.noise_p < 0.0 || spec.noise_p > 1.0)
        throw validation_error("noise_p must be within [0,1]");
    return spec;
}

inline json model_spec_to_json(const ModelSpec& spec) {
    json j{{"id", spec.id}, {"kind", to_string(spec.kind)}};
    if (!spec.endpoint.empty())
        j["endpoint"] = spec.endpoint;
    if (!spec.model_name.empty())
        j["model_name"] = spec.model_name;
    if (!spec.path.empty())
        j["path"] = spec.path;
    if (!spec.decode_option.empty())
        j["decode_option"] = spec.decode_option;
    if (spec.kind == ModelKind::cluster_oracle) {
        j["noise_p"] = spec.noise_p;
        j["seed"] = spec.seed;
    }
    return j;
}

inline SelectionConfig selection_config_from_json(const json& j) {
    detail::require_object(j, "selection config");
    detail::check_known_keys(j,
        {"method", "k", "preselect_n", "preselect_algo", "first_round",
         "first_round_k", "similarity", "tokenizer", "template_id", "template",
         "inverse_model", "inference_model", "seed", "decode_option",
         "prompt_order", "parallelism"},
        "selection config");
    SelectionConfig cfg;
    cfg.method = method_from_string(j.at("method").get<std::string>());
    cfg.k = j.at("k").get<std::size_t>();
    if (cfg.k == 0)
        throw validation_error("k must be positive");
    cfg.preselect_n = j.contains("preselect_n")
                          ? j.at("preselect_n").get<std::size_t>()
                          : 2 * cfg.k;
    if (cfg.preselect_n == 0)
        throw validation_error("preselect_n must be positive");
    if (cfg.k > cfg.preselect_n)
        throw validation_error("k must not exceed preselect_n");
    if (j.contains("preselect_algo"))
        cfg.preselect_algo = preselect_algo_from_string(j.at("preselect_algo").get<std::string>());
    if (j.contains("first_round"))
        cfg.first_round = first_round_from_string(j.at("first_round").get<std::string>());
    cfg.first_round_k = j.value("first_round_k", std::size_t{1});
    if (cfg.first_round_k == 0)
        throw validation_error("first_round_k must be positive");
    if (j.contains("similarity"))
        cfg.similarity = similarity_from_string(j.at("similarity").get<std::string>());
    if (j.contains("tokenizer"))
        cfg.tokenizer = tokenizer_from_string(j.at("tokenizer").get<std::string>());
    cfg.template_id = j.value("template_id", std::string("qa"));
    if (j.contains("template"))
        cfg.template_override = j.at("template");
    if (j.contains("inverse_model"))
        cfg.inverse_model = model_spec_from_json(j.at("inverse_model"));
    if (j.contains("inference_model"))
        cfg.inference_model = model_spec_from_json(j.at("inference_model"));
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.decode_option = j.value("decode_option", "");
    // the config-level tag fills model specs that do not set their own; the
    // model-level tag is what reaches backends and cache keys
    if (!cfg.decode_option.empty()) {
        if (cfg.inverse_model && cfg.inverse_model->decode_option.empty())
            cfg.inverse_model->decode_option = cfg.decode_option;
        if (cfg.inference_model && cfg.inference_model->decode_option.empty())
            cfg.inference_model->decode_option = cfg.decode_option;
    }
    if (j.contains("prompt_order"))
        cfg.prompt_order = prompt_order_from_string(j.at("prompt_order").get<std::string>());
    cfg.parallelism = j.value("parallelism", 1);
    if (cfg.parallelism < 1)
        throw validation_error("parallelism must be >= 1");
    return cfg;
}

inline json selection_config_to_json(const SelectionConfig& cfg) {
    json j{
        {"method", to_string(cfg.method)},
        {"k", cfg.k},
        {"preselect_n", cfg.preselect_n},
        {"preselect_algo", to_string(cfg.preselect_algo)},
        {"first_round", to_string(cfg.first_round)},
        {"first_round_k", cfg.first_round_k},
        {"similarity", to_string(cfg.similarity)},
        {"tokenizer", to_string(cfg.tokenizer)},
        {"template_id", cfg.template_id},
        {"seed", cfg.seed},
        {"prompt_order", to_string(cfg.prompt_order)},
        {"parallelism", cfg.parallelism},
    };
    if (!cfg.decode_option.empty())
        j["decode_option"] = cfg.decode_option;
    if (cfg.template_override)
        j["template"] = *cfg.template_override;
    if (cfg.inverse_model)
        j["inverse_model"] = model_spec_to_json(*cfg.inverse_model);
    if (cfg.inference_model)
        j["inference_model"] = model_spec_to_json(*cfg.inference_model);
    return j;
}

} // namespace bycs
