#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bycs/datastore.hpp"
#include "bycs/detail/parallel.hpp"
#include "bycs/select.hpp"

namespace bycs {

enum class Metric { accuracy, wer };
enum class Normalizer { exact, lower_strip_punct };

namespace detail {

inline constexpr EnumName<Metric> metric_names[] = {
    {Metric::accuracy, "accuracy"}, {Metric::wer, "wer"},
};
inline constexpr EnumName<Normalizer> normalizer_names[] = {
    {Normalizer::exact, "exact"}, {Normalizer::lower_strip_punct, "lower_strip_punct"},
};

} // namespace detail

inline std::string to_string(Metric v) { return detail::enum_to_string(detail::metric_names, v); }
inline std::string to_string(Normalizer v) { return detail::enum_to_string(detail::normalizer_names, v); }
inline Metric metric_from_string(const std::string& s) { return detail::enum_from_string(detail::metric_names, s, "metric"); }
inline Normalizer normalizer_from_string(const std::string& s) { return detail::enum_from_string(detail::normalizer_names, s, "normalizer"); }

struct ExperimentArm {
    std::string name;
    SelectionConfig config;
};

struct ExperimentSpec {
    std::string datastore_path;
    std::string testset_path;
    std::vector<ExperimentArm> arms;
    Metric metric = Metric::accuracy;
    Normalizer normalizer = Normalizer::lower_strip_punct;
    std::string output_dir;
    std::uint64_t seed = 0;
    int parallelism = 1;
    std::size_t entropy_bins = 20;
};

inline ExperimentSpec experiment_spec_from_json(const json& j) {
    detail::require_object(j, "experiment spec");
    detail::check_known_keys(j,
        {"datastore", "testset", "arms", "metric", "normalizer", "output_dir",
         "seed", "parallelism", "entropy_bins"},
        "experiment spec");
    ExperimentSpec spec;
    spec.datastore_path = j.at("datastore").get<std::string>();
    spec.testset_path = j.at("testset").get<std::string>();
    spec.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("arms") || !j.at("arms").is_array() || j.at("arms").empty())
        throw validation_error("experiment spec needs a non-empty \"arms\" array");
    for (const auto& arm_json : j.at("arms")) {
        detail::require_object(arm_json, "arm");
        detail::check_known_keys(arm_json, {"name", "config"}, "arm");
        json cfg_json = arm_json.at("config");
        if (!cfg_json.contains("seed"))
            cfg_json["seed"] = spec.seed; // arms inherit the experiment seed
        ExperimentArm arm;
        arm.config = selection_config_from_json(cfg_json);
        arm.name = arm_json.value("name", to_string(arm.config.method));
        spec.arms.push_back(std::move(arm));
    }
    if (j.contains("metric"))
        spec.metric = metric_from_string(j.at("metric").get<std::string>());
    if (j.contains("normalizer"))
        spec.normalizer = normalizer_from_string(j.at("normalizer").get<std::string>());
    spec.output_dir = j.value("output_dir", std::string("."));
    spec.parallelism = j.value("parallelism", 1);
    if (spec.parallelism < 1)
        throw validation_error("parallelism must be >= 1");
    spec.entropy_bins = j.value("entropy_bins", std::size_t{20});
    if (spec.entropy_bins == 0)
        throw validation_error("entropy_bins must be >= 1");
    return spec;
}

// Echoes the experiment definition. Execution knobs (output_dir,
// parallelism) are left out: results must be byte-identical no matter where
// they are written or how many workers ran them.
inline json experiment_spec_to_json(const ExperimentSpec& spec) {
    json arms = json::array();
    for (const auto& arm : spec.arms)
        arms.push_back(json{{"name", arm.name},
                            {"config", selection_config_to_json(arm.config)}});
    return json{{"datastore", spec.datastore_path},
                {"testset", spec.testset_path},
                {"arms", std::move(arms)},
                {"metric", to_string(spec.metric)},
                {"normalizer", to_string(spec.normalizer)},
                {"seed", spec.seed},
                {"entropy_bins", spec.entropy_bins}};
}

/// Shannon entropy (natural log) of the normalized histogram over `bins`
/// equal-width bins spanning [min, max] of the scores. A single point or a
/// degenerate range has entropy 0. Never exceeds ln(bins).
inline double score_entropy(const std::vector<double>& scores, std::size_t bins) {
    if (scores.empty())
        throw validation_error("score_entropy: empty score list");
    if (bins == 0)
        throw validation_error("score_entropy: bins must be >= 1");
    double lo = scores.front(), hi = scores.front();
    for (double s : scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (lo == hi)
        return 0.0;
    std::vector<std::size_t> hist(bins, 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double s : scores) {
        auto idx = static_cast<std::size_t>((s - lo) / width);
        if (idx >= bins)
            idx = bins - 1;
        ++hist[idx];
    }
    double entropy = 0.0;
    for (std::size_t count : hist) {
        if (count == 0)
            continue;
        const double p = static_cast<double>(count) / static_cast<double>(scores.size());
        entropy -= p * std::log(p);
    }
    return entropy;
}

/// Answer normalization before exact-match comparison.
inline std::string normalize_answer(const std::string& text, Normalizer mode) {
    if (mode == Normalizer::exact)
        return text;
    std::vector<char32_t> cps;
    std::size_t pos = 0;
    while (pos < text.size())
        cps.push_back(detail::utf8_next(text, pos));
    std::size_t begin = 0, end = cps.size();
    while (begin < end && (detail::is_unicode_space(cps[begin]) ||
                           detail::is_strippable_punct(cps[begin])))
        ++begin;
    while (end > begin && (detail::is_unicode_space(cps[end - 1]) ||
                           detail::is_strippable_punct(cps[end - 1])))
        --end;
    std::string out;
    for (std::size_t i = begin; i < end; ++i)
        detail::utf8_append(out, detail::ascii_lower(cps[i]));
    return out;
}

struct TestRecord {
    std::string test_id;
    std::uint64_t run_seed = 0;
    std::vector<std::string> selected;
    Hypothesis hypothesis;
    std::vector<ScoredCandidate> candidates;
    std::string output;
    std::string reference;
    bool correct = false;    // accuracy metric
    EditCounts edits;        // wer metric
    std::size_t inverse_calls = 0;
};

struct ArmResult {
    std::string name;
    Method method = Method::bycs;
    std::size_t k = 0;
    bool failed = false;
    bool backend_failure = false;
    std::string error;
    double metric_value = 0.0;
    double mean_inverse_calls = 0.0;
    std::optional<double> entropy; // of pooled candidate scores
    std::size_t entropy_bins = 0;
    std::size_t precompute_calls = 0;
    std::vector<TestRecord> tests;
};

struct EvaluationResults {
    ExperimentSpec spec;
    std::vector<ArmResult> arms;
};

namespace detail {

inline json test_record_to_json(const TestRecord& rec, Metric metric) {
    json candidates = json::array();
    for (const auto& c : rec.candidates)
        candidates.push_back(json{{"example_id", c.example_id},
                                  {"score", c.score},
                                  {"preselect_rank", c.preselect_rank}});
    json j{{"test_id", rec.test_id},
           {"run_seed", rec.run_seed},
           {"selected", rec.selected},
           {"hypothesis", json{{"text", rec.hypothesis.text},
                               {"provenance", to_string(rec.hypothesis.provenance)}}},
           {"candidates", std::move(candidates)},
           {"output", rec.output},
           {"reference", rec.reference},
           {"inverse_calls", rec.inverse_calls}};
    if (metric == Metric::accuracy)
        j["correct"] = rec.correct;
    else
        j["edits"] = json{{"substitutions", rec.edits.substitutions},
                          {"deletions", rec.edits.deletions},
                          {"insertions", rec.edits.insertions},
                          {"ref_len", rec.edits.ref_len}};
    return j;
}

} // namespace detail

/// Runs every arm over every test: select examples, render the prompt, ask
/// the inference model, score against the reference. A failing arm is
/// reported in place; the remaining arms still run. Tests within an arm may
/// run concurrently; aggregation is by (pass, test id), so results are
/// identical at any parallelism level.
inline EvaluationResults run_evaluation(const ExperimentSpec& spec,
                                        const Datastore& ds,
                                        const std::vector<TestInstance>& tests,
                                        const ModelFactory& factory,
                                        InverseCache* cache = nullptr) {
    for (const auto& t : tests)
        if (!t.reference)
            throw validation_error("metric " + to_string(spec.metric) +
                                   " requires a reference for every test; \"" + t.id +
                                   "\" has none");
    EvaluationResults results;
    results.spec = spec;
    for (const auto& arm : spec.arms) {
        ArmResult out;
        out.name = arm.name;
        out.method = arm.config.method;
        out.k = arm.config.k;
        out.entropy_bins = spec.entropy_bins;
        try {
            const SelectionConfig& cfg = arm.config;
            const PromptTemplate tmpl = resolve_template(cfg);
            ModelSet models;
            if (!cfg.inference_model)
                throw validation_error("arm \"" + arm.name + "\" needs an inference_model");
            models.inference = factory(*cfg.inference_model);
            const bool probing = cfg.method == Method::bycs ||
                                 cfg.method == Method::oracle_bycs ||
                                 cfg.method == Method::bycs_fast;
            if (probing) {
                if (!cfg.inverse_model)
                    throw validation_error("arm \"" + arm.name + "\" needs an inverse_model");
                models.inverse = factory(*cfg.inverse_model);
            }

            Bm25Index bm25;
            SelectionResources res;
            res.cache = cache;
            if (cfg.method == Method::bm25 ||
                (probing && cfg.preselect_algo == PreselectAlgo::bm25)) {
                bm25 = bm25_build(ds, cfg.tokenizer);
                res.bm25 = &bm25;
            }

            FastSelectionMap fast_map;
            if (cfg.method == Method::bycs_fast) {
                const std::size_t before = models.inverse->call_count();
                fast_map = precompute_fast(cfg, models, tmpl, ds, res);
                out.precompute_calls = models.inverse->call_count() - before;
            }

            // The random baseline is averaged over three seeds.
            std::vector<std::uint64_t> pass_seeds{cfg.seed};
            if (cfg.method == Method::random)
                pass_seeds = {cfg.seed, cfg.seed + 1, cfg.seed + 2};

            std::vector<double> pass_values;
            for (std::uint64_t pass_seed : pass_seeds) {
                SelectionConfig pass_cfg = cfg;
                pass_cfg.seed = pass_seed;
                std::vector<TestRecord> records(tests.size());
                detail::parallel_for(tests.size(), spec.parallelism, [&](std::size_t i) {
                    const TestInstance& test = tests[i];
                    SelectionResult sel =
                        select_examples(pass_cfg, models, tmpl, test, ds, res,
                                        cfg.method == Method::bycs_fast ? &fast_map : nullptr);
                    const std::string prompt = render_prompt(
                        tmpl, detail::example_pairs(ds, sel.selected), test.input);
                    TestRecord rec;
                    rec.test_id = test.id;
                    rec.run_seed = pass_seed;
                    rec.selected = std::move(sel.selected);
                    rec.hypothesis = std::move(sel.hypothesis);
                    rec.candidates = std::move(sel.candidates);
                    rec.inverse_calls = sel.inverse_calls;
                    rec.output = models.inference->infer(prompt);
                    rec.reference = *test.reference;
                    if (spec.metric == Metric::accuracy)
                        rec.correct = normalize_answer(rec.output, spec.normalizer) ==
                                      normalize_answer(rec.reference, spec.normalizer);
                    else
                        rec.edits = align_edits(tokenize(rec.reference, cfg.tokenizer),
                                                tokenize(rec.output, cfg.tokenizer));
                    records[i] = std::move(rec);
                });
                std::sort(records.begin(), records.end(),
                          [](const TestRecord& a, const TestRecord& b) {
                              return a.test_id < b.test_id;
                          });
                if (spec.metric == Metric::accuracy) {
                    std::size_t hits = 0;
                    for (const auto& r : records)
                        hits += r.correct ? 1 : 0;
                    pass_values.push_back(static_cast<double>(hits) /
                                          static_cast<double>(records.size()));
                } else {
                    std::size_t errs = 0, ref_total = 0;
                    for (const auto& r : records) {
                        if (r.edits.ref_len == 0)
                            throw validation_error("empty reference under tokenizer for test \"" +
                                                   r.test_id + "\"");
                        errs += r.edits.total();
                        ref_total += r.edits.ref_len;
                    }
                    pass_values.push_back(static_cast<double>(errs) /
                                          static_cast<double>(ref_total));
                }
                for (auto& r : records)
                    out.tests.push_back(std::move(r));
            }

            double value_sum = 0.0;
            for (double v : pass_values)
                value_sum += v;
            out.metric_value = value_sum / static_cast<double>(pass_values.size());
            std::size_t call_sum = 0;
            for (const auto& r : out.tests)
                call_sum += r.inverse_calls;
            out.mean_inverse_calls = static_cast<double>(call_sum) /
                                     static_cast<double>(out.tests.size());
            std::vector<double> scores;
            for (const auto& r : out.tests)
                for (const auto& c : r.candidates)
                    scores.push_back(c.score);
            if (!scores.empty())
                out.entropy = score_entropy(scores, spec.entropy_bins);
        } catch (const backend_error& e) {
            out.failed = true;
            out.backend_failure = true;
            out.error = e.what();
        } catch (const error& e) {
            out.failed = true;
            out.error = e.what();
        }
        results.arms.push_back(std::move(out));
    }
    return results;
}

/// Convenience wrapper: loads and validates the datastore and testset named
/// by the spec, then runs the arms.
inline EvaluationResults run_evaluation(const ExperimentSpec& spec,
                                        const ModelFactory& factory,
                                        InverseCache* cache = nullptr) {
    Datastore ds = load_datastore(spec.datastore_path);
    const auto violations = validate_datastore(ds);
    if (!violations.empty()) {
        std::string msg = "datastore failed validation:";
        for (const auto& v : violations)
            msg += " [" + v.record_id + ": " + v.rule + "]";
        throw validation_error(msg);
    }
    const auto tests = load_testset(spec.testset_path);
    if (tests.empty())
        throw validation_error("testset is empty: " + spec.testset_path);
    check_embedding_dims(ds, tests);
    return run_evaluation(spec, ds, tests, factory, cache);
}

inline json results_to_json(const EvaluationResults& results) {
    json arms = json::array();
    for (const auto& arm : results.arms) {
        json a{{"name", arm.name},
               {"method", to_string(arm.method)},
               {"k", arm.k}};
        if (arm.failed) {
            a["error"] = arm.error;
            a["backend_failure"] = arm.backend_failure;
        } else {
            a["metric"] = to_string(results.spec.metric);
            a["value"] = arm.metric_value;
            a["mean_inverse_calls"] = arm.mean_inverse_calls;
            if (arm.entropy)
                a["score_entropy"] =
                    json{{"bins", arm.entropy_bins}, {"value", *arm.entropy}};
            if (arm.method == Method::bycs_fast)
                a["precompute_calls"] = arm.precompute_calls;
            json tests = json::array();
            for (const auto& rec : arm.tests)
                tests.push_back(detail::test_record_to_json(rec, results.spec.metric));
            a["tests"] = std::move(tests);
        }
        arms.push_back(std::move(a));
    }
    return json{{"spec", experiment_spec_to_json(results.spec)},
                {"arms", std::move(arms)}};
}

/// Writes results.json (full per-test records) and results.md (one table row
/// per arm, in declaration order). Re-running with identical inputs produces
/// byte-identical files.
inline void emit_report(const EvaluationResults& results,
                        const std::filesystem::path& output_dir) {
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (ec)
        throw validation_error("cannot create output dir: " + output_dir.string() +
                               ": " + ec.message());
    {
        std::ofstream out(output_dir / "results.json", std::ios::trunc);
        if (!out)
            throw validation_error("cannot write results.json in " + output_dir.string());
        out << results_to_json(results).dump(2) << '\n';
        if (!out)
            throw validation_error("write failed: results.json");
    }
    const char* metric_header =
        results.spec.metric == Metric::accuracy ? "%Acc" : "%WER";
    std::ofstream md(output_dir / "results.md");
    if (!md)
        throw validation_error("cannot write results.md in " + output_dir.string());
    md << "| arm | method | k | " << metric_header << " | mean inverse_calls |\n";
    md << "|---|---|---|---|---|\n";
    char buf[64];
    for (const auto& arm : results.arms) {
        if (arm.failed) {
            md << "| " << arm.name << " | " << to_string(arm.method) << " | " << arm.k
               << " | failed | failed |\n";
            continue;
        }
        std::snprintf(buf, sizeof(buf), "%.2f", arm.metric_value * 100.0);
        md << "| " << arm.name << " | " << to_string(arm.method) << " | " << arm.k
           << " | " << buf << " | ";
        std::snprintf(buf, sizeof(buf), "%.2f", arm.mean_inverse_calls);
        md << buf << " |\n";
    }
    if (!md)
        throw validation_error("write failed: results.md");
}

} // namespace bycs
