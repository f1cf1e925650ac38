#pragma once

#include <algorithm>
#include <atomic>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bycs/bm25.hpp"
#include "bycs/detail/parallel.hpp"
#include "bycs/knn.hpp"
#include "bycs/metrics.hpp"
#include "bycs/model.hpp"
#include "bycs/sample.hpp"
#include "bycs/types.hpp"

namespace bycs {

/// Outcome of selecting in-context examples for one test instance.
/// `candidates` carries every pre-selected candidate with its probe score
/// (empty for the baseline methods, which score nothing); `selected` is the
/// final top-k in prompt order; `inverse_calls` counts probe calls that
/// actually reached the backend during scoring.
struct SelectionResult {
    std::string test_id;
    Method method = Method::bycs;
    Hypothesis hypothesis;
    std::vector<ScoredCandidate> candidates;
    std::vector<std::string> selected;
    std::size_t inverse_calls = 0;
};

inline json selection_result_to_json(const SelectionResult& r) {
    json candidates = json::array();
    for (const auto& c : r.candidates)
        candidates.push_back(json{{"example_id", c.example_id},
                                  {"score", c.score},
                                  {"preselect_rank", c.preselect_rank}});
    return json{{"test_id", r.test_id},
                {"method", to_string(r.method)},
                {"hypothesis", json{{"text", r.hypothesis.text},
                                    {"provenance", to_string(r.hypothesis.provenance)}}},
                {"candidates", std::move(candidates)},
                {"selected", r.selected},
                {"inverse_calls", r.inverse_calls}};
}

/// Models used by one pipeline run: the inference model answers first-round
/// and final prompts, the inverse model answers candidate probes. They may
/// be the same backend or differently sized members of one family.
struct ModelSet {
    std::shared_ptr<ModelClient> inference;
    std::shared_ptr<ModelClient> inverse;
};

/// Shared per-(config, datastore) resources. The bm25 index is built once
/// and reused across tests; the cache and embedder are optional.
struct SelectionResources {
    const Bm25Index* bm25 = nullptr;
    InverseCache* cache = nullptr;
    Embedder embedder;
};

namespace detail {

inline Provenance provenance_of(FirstRound mode) {
    switch (mode) {
        case FirstRound::default_decode: return Provenance::default_decode;
        case FirstRound::random_icl: return Provenance::random_icl;
        case FirstRound::baseline_icl: return Provenance::baseline_icl;
        case FirstRound::oracle: return Provenance::oracle;
    }
    return Provenance::default_decode;
}

inline std::vector<std::pair<std::string, std::string>>
example_pairs(const Datastore& ds, const std::vector<std::string>& ids) {
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(ids.size());
    for (const auto& id : ids) {
        const Example* ex = ds.find(id);
        if (!ex)
            throw validation_error("unknown example id: \"" + id + "\"");
        pairs.emplace_back(ex->input, ex->label);
    }
    return pairs;
}

} // namespace detail

/// Produces the hypothesized label for a test input. `default` decodes with
/// no context; `random_icl`/`baseline_icl` decode with k' seeded-random or
/// k' nearest examples in context, which tends to give a better hypothesis;
/// `oracle` substitutes the reference and is the upper bound.
inline Hypothesis first_round_hypothesis(const SelectionConfig& cfg,
                                         ModelClient& inference_model,
                                         const TestInstance& test,
                                         const Datastore& ds,
                                         const PromptTemplate& tmpl) {
    Hypothesis hyp;
    hyp.test_id = test.id;
    hyp.provenance = detail::provenance_of(cfg.first_round);
    switch (cfg.first_round) {
        case FirstRound::oracle:
            if (!test.reference)
                throw validation_error("first_round oracle requires a reference for test \"" +
                                       test.id + "\"");
            hyp.text = *test.reference;
            return hyp;
        case FirstRound::default_decode:
            hyp.text = inference_model.infer(render_prompt(tmpl, {}, test.input));
            return hyp;
        case FirstRound::random_icl: {
            const auto ids = random_select(ds, cfg.first_round_k, cfg.seed);
            hyp.text = inference_model.infer(
                render_prompt(tmpl, detail::example_pairs(ds, ids), test.input));
            return hyp;
        }
        case FirstRound::baseline_icl: {
            if (!test.embedding)
                throw validation_error("first_round baseline_icl requires an embedding for test \"" +
                                       test.id + "\"");
            const auto ids = knn_rank(*test.embedding, ds, cfg.first_round_k);
            hyp.text = inference_model.infer(
                render_prompt(tmpl, detail::example_pairs(ds, ids), test.input));
            return hyp;
        }
    }
    throw validation_error("unknown first_round mode");
}

/// Cheap ranking pass that caps the candidate set at preselect_n before the
/// expensive probes; list position becomes preselect_rank.
inline std::vector<std::string> preselect(const SelectionConfig& cfg,
                                          const TestInstance& test,
                                          const Datastore& ds,
                                          const std::unordered_set<std::string>& exclude,
                                          const SelectionResources& res) {
    switch (cfg.preselect_algo) {
        case PreselectAlgo::knn:
            if (!test.embedding)
                throw validation_error("preselect knn requires an embedding for test \"" +
                                       test.id + "\"");
            return knn_rank(*test.embedding, ds, cfg.preselect_n, exclude);
        case PreselectAlgo::bm25:
            if (!res.bm25)
                throw validation_error("preselect bm25 requires a built index");
            return bm25_rank(*res.bm25, test.input, cfg.preselect_n, exclude);
    }
    throw validation_error("unknown preselect algorithm");
}

/// Probes every pre-selected candidate independently: the candidate's label
/// is re-predicted with the (test input, hypothesis) pair as context, and
/// the similarity between prediction and true label becomes the score.
/// Probes may run concurrently up to cfg.parallelism; output order is the
/// pre-selection order regardless of schedule. Any backend failure aborts
/// the whole instance — a partially scored ranking would be silently biased.
inline std::vector<ScoredCandidate> score_candidates(
    const SelectionConfig& cfg, ModelClient& inverse_model,
    const PromptTemplate& tmpl, const TestInstance& test, const Hypothesis& hyp,
    const std::vector<std::string>& candidate_ids, const Datastore& ds,
    const SelectionResources& res, std::size_t* backend_calls = nullptr) {
    const ScoringContext scoring{cfg.tokenizer, res.embedder};
    std::vector<const Example*> examples;
    examples.reserve(candidate_ids.size());
    for (const auto& id : candidate_ids) {
        const Example* ex = ds.find(id);
        if (!ex)
            throw validation_error("candidate id not in datastore: \"" + id + "\"");
        examples.push_back(ex);
    }
    std::vector<ScoredCandidate> out(candidate_ids.size());
    std::atomic<std::size_t> calls{0};
    std::atomic<std::size_t> completed{0};
    try {
        detail::parallel_for(candidate_ids.size(), cfg.parallelism, [&](std::size_t i) {
            const Example& ex = *examples[i];
            const InverseResult probe = inverse_infer(
                inverse_model, tmpl,
                InverseQuery{test.id, test.input, hyp.text, ex.id, ex.input},
                res.cache);
            if (!probe.cached)
                calls.fetch_add(1, std::memory_order_relaxed);
            out[i] = ScoredCandidate{
                ex.id, probe.output,
                similarity_score(cfg.similarity, ex.label, probe.output, scoring), i};
            completed.fetch_add(1, std::memory_order_relaxed);
        });
    } catch (const backend_error& e) {
        throw backend_error("test \"" + test.id + "\": scoring aborted after " +
                            std::to_string(completed.load()) + "/" +
                            std::to_string(candidate_ids.size()) +
                            " candidates: " + e.what());
    }
    if (backend_calls)
        *backend_calls = calls.load();
    return out;
}

/// Top-k candidate ids under the ranking rule: score descending, ties by
/// ascending preselect_rank, then ascending id. The returned order is the
/// prompt order: score_descending places the best example first (nearest
/// the preamble), score_ascending reverses that.
inline std::vector<std::string> rank_selected(const std::vector<ScoredCandidate>& candidates,
                                              std::size_t k, PromptOrder order) {
    if (k > candidates.size())
        throw validation_error("rank_selected: k exceeds candidate count");
    std::vector<const ScoredCandidate*> ranked;
    ranked.reserve(candidates.size());
    for (const auto& c : candidates)
        ranked.push_back(&c);
    std::sort(ranked.begin(), ranked.end(),
              [](const ScoredCandidate* a, const ScoredCandidate* b) {
                  if (a->score != b->score)
                      return a->score > b->score;
                  if (a->preselect_rank != b->preselect_rank)
                      return a->preselect_rank < b->preselect_rank;
                  return a->example_id < b->example_id;
              });
    std::vector<std::string> selected;
    selected.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        selected.push_back(ranked[i]->example_id);
    if (order == PromptOrder::score_ascending)
        std::reverse(selected.begin(), selected.end());
    return selected;
}

/// Pipeline core with an externally supplied hypothesis; exposed so oracle
/// runs and precomputation can inject one directly.
inline SelectionResult bycs_select_with_hypothesis(
    const SelectionConfig& cfg, ModelClient& inverse_model,
    const PromptTemplate& tmpl, const TestInstance& test, const Datastore& ds,
    Hypothesis hyp, const SelectionResources& res,
    const std::unordered_set<std::string>& exclude = {}) {
    std::size_t eligible = 0;
    for (const auto& ex : ds.examples)
        if (!exclude.count(ex.id))
            ++eligible;
    if (cfg.preselect_n > eligible)
        throw validation_error("preselect_n=" + std::to_string(cfg.preselect_n) +
                               " exceeds eligible datastore size " +
                               std::to_string(eligible));
    SelectionResult result;
    result.test_id = test.id;
    result.method = cfg.method;
    result.hypothesis = std::move(hyp);
    const auto candidate_ids = preselect(cfg, test, ds, exclude, res);
    result.candidates = score_candidates(cfg, inverse_model, tmpl, test,
                                         result.hypothesis, candidate_ids, ds, res,
                                         &result.inverse_calls);
    result.selected = rank_selected(result.candidates, cfg.k, cfg.prompt_order);
    return result;
}

/// Full pipeline: first-round hypothesis, pre-selection, per-candidate
/// probing, ranked top-k. The probe budget is bounded by preselect_n no
/// matter how large the datastore is.
inline SelectionResult bycs_select(const SelectionConfig& cfg, const ModelSet& models,
                                   const PromptTemplate& tmpl, const TestInstance& test,
                                   const Datastore& ds, const SelectionResources& res,
                                   const std::unordered_set<std::string>& exclude = {}) {
    if (!models.inverse)
        throw validation_error("bycs_select requires an inverse model");
    SelectionConfig effective = cfg;
    if (cfg.method == Method::oracle_bycs)
        effective.first_round = FirstRound::oracle;
    if (effective.first_round != FirstRound::oracle && !models.inference)
        throw validation_error("first_round \"" + to_string(effective.first_round) +
                               "\" requires an inference model");
    Hypothesis hyp;
    if (effective.first_round == FirstRound::oracle) {
        if (!test.reference)
            throw validation_error("first_round oracle requires a reference for test \"" +
                                   test.id + "\"");
        hyp = Hypothesis{test.id, *test.reference, Provenance::oracle};
    } else {
        hyp = first_round_hypothesis(effective, *models.inference, test, ds, tmpl);
    }
    return bycs_select_with_hypothesis(effective, *models.inverse, tmpl, test, ds,
                                       std::move(hyp), res, exclude);
}

// --- precomputed variant ----------------------------------------------------

/// example id -> selected ids, computed offline. Entries keep datastore
/// order for stable files.
struct FastSelectionMap {
    std::vector<std::pair<std::string, std::vector<std::string>>> entries;
    std::unordered_map<std::string, std::size_t> index;

    void add(std::string id, std::vector<std::string> selected) {
        index.emplace(id, entries.size());
        entries.emplace_back(std::move(id), std::move(selected));
    }

    const std::vector<std::string>* find(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end())
            return nullptr;
        return &entries[it->second].second;
    }
};

/// Runs the pipeline once per datastore example before any test arrives.
/// Each example acts as its own pseudo-test with an oracle hypothesis (its
/// label) and is excluded from its own pre-selection — self-selection would
/// trivially score 1.0. preselect_n shrinks to the leave-one-out size when
/// the datastore is small.
inline FastSelectionMap precompute_fast(const SelectionConfig& cfg,
                                        const ModelSet& models,
                                        const PromptTemplate& tmpl,
                                        const Datastore& ds,
                                        const SelectionResources& res) {
    if (ds.size() < cfg.k + 1)
        throw validation_error("precompute_fast requires datastore size >= k+1");
    if (!models.inverse)
        throw validation_error("precompute_fast requires an inverse model");
    SelectionConfig effective = cfg;
    effective.first_round = FirstRound::oracle;
    effective.preselect_n = std::min(cfg.preselect_n, ds.size() - 1);
    FastSelectionMap map;
    for (const auto& ex : ds.examples) {
        TestInstance pseudo{ex.id, ex.input, ex.label, ex.embedding};
        Hypothesis hyp{ex.id, ex.label, Provenance::oracle};
        SelectionResult r = bycs_select_with_hypothesis(
            effective, *models.inverse, tmpl, pseudo, ds, std::move(hyp), res,
            {ex.id});
        map.add(ex.id, std::move(r.selected));
    }
    return map;
}

/// Serves a query from the precomputed map: the nearest datastore example's
/// selection is returned verbatim, with zero probe calls at query time.
inline SelectionResult select_fast(const FastSelectionMap& map, const TestInstance& test,
                                   const Datastore& ds, const SelectionConfig& cfg) {
    for (const auto& ex : ds.examples)
        if (!map.find(ex.id))
            throw validation_error("fast-selection map is missing example \"" + ex.id +
                                   "\"");
    if (!test.embedding)
        throw validation_error("select_fast requires an embedding for test \"" +
                               test.id + "\"");
    const auto nearest = knn_rank(*test.embedding, ds, 1);
    SelectionResult result;
    result.test_id = test.id;
    result.method = Method::bycs_fast;
    result.hypothesis = Hypothesis{test.id, "", Provenance::default_decode};
    result.selected = *map.find(nearest.front());
    result.inverse_calls = 0;
    if (result.selected.size() != cfg.k)
        throw validation_error("fast-selection map entry for \"" + nearest.front() +
                               "\" has " + std::to_string(result.selected.size()) +
                               " ids, config expects k=" + std::to_string(cfg.k));
    return result;
}

// --- method dispatch ---------------------------------------------------

/// Runs whichever selection method the config names, normalizing the output
/// shape. Baselines leave `candidates` empty and never probe.
inline SelectionResult select_examples(const SelectionConfig& cfg, const ModelSet& models,
                                       const PromptTemplate& tmpl, const TestInstance& test,
                                       const Datastore& ds, const SelectionResources& res,
                                       const FastSelectionMap* fast_map = nullptr) {
    SelectionResult result;
    result.test_id = test.id;
    result.method = cfg.method;
    result.hypothesis = Hypothesis{test.id, "", Provenance::default_decode};
    switch (cfg.method) {
        case Method::random:
            result.selected = random_select(ds, cfg.k, cfg.seed);
            return result;
        case Method::knn:
            if (!test.embedding)
                throw validation_error("knn selection requires an embedding for test \"" +
                                       test.id + "\"");
            result.selected = knn_rank(*test.embedding, ds, cfg.k);
            return result;
        case Method::bm25:
            if (!res.bm25)
                throw validation_error("bm25 selection requires a built index");
            result.selected = bm25_rank(*res.bm25, test.input, cfg.k);
            return result;
        case Method::bycs:
        case Method::oracle_bycs:
            return bycs_select(cfg, models, tmpl, test, ds, res);
        case Method::bycs_fast:
            if (!fast_map)
                throw validation_error("bycs_fast requires a precomputed selection map");
            return select_fast(*fast_map, test, ds, cfg);
    }
    throw validation_error("unknown selection method");
}

// --- fast map serialization ---------------------------------------------

inline void write_fast_map(const FastSelectionMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw validation_error("cannot open fast-map file for writing: " + path.string());
    for (const auto& [id, selected] : map.entries)
        out << json{{"example_id", id}, {"selected", selected}}.dump() << '\n';
    if (!out)
        throw validation_error("fast-map write failed: " + path.string());
}

inline FastSelectionMap load_fast_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw validation_error("cannot open fast-map file: " + path.string());
    FastSelectionMap map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("example_id") ||
            !j.contains("selected"))
            throw validation_error(path.string() + ":" + std::to_string(lineno) +
                                   ": malformed fast-map record");
        map.add(j.at("example_id").get<std::string>(),
                j.at("selected").get<std::vector<std::string>>());
    }
    return map;
}

} // namespace bycs
