// Command-line front end: datastore validation, synthetic world generation,
// single-instance selection, offline precomputation, evaluation runs, and
// score-distribution entropy.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bycs/bycs.hpp"

namespace {

bycs::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw bycs::validation_error("cannot open file: " + path);
    bycs::json j = bycs::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw bycs::validation_error("malformed JSON in " + path);
    return j;
}

void require_clean_datastore(const bycs::Datastore& ds) {
    const auto report = bycs::validate_datastore(ds);
    if (report.empty())
        return;
    std::string msg = "datastore failed validation:";
    for (const auto& v : report)
        msg += "\n  " + v.record_id + ": " + v.rule;
    throw bycs::validation_error(msg);
}

int cmd_ingest(const std::string& path, bool as_testset) {
    if (as_testset) {
        const auto tests = bycs::load_testset(path);
        std::cout << "ok: " << tests.size() << " test instances\n";
        return 0;
    }
    const bycs::Datastore ds = bycs::load_datastore(path);
    const auto report = bycs::validate_datastore(ds);
    for (const auto& v : report)
        std::cout << v.record_id << ": " << v.rule << "\n";
    if (!report.empty()) {
        std::cout << report.size() << " violation(s)\n";
        return 1;
    }
    std::cout << "ok: " << ds.size() << " examples";
    if (ds.embedding_dim)
        std::cout << ", embedding_dim=" << *ds.embedding_dim;
    std::cout << "\n";
    return 0;
}

int cmd_genworld(const bycs::WorldParams& params, const std::string& out_dir) {
    const bycs::ClusterWorld world = bycs::generate_cluster_world(params);
    std::filesystem::create_directories(out_dir);
    const auto ds_path = std::filesystem::path(out_dir) / "datastore.jsonl";
    const auto test_path = std::filesystem::path(out_dir) / "testset.jsonl";
    bycs::write_datastore(world.datastore, ds_path);
    bycs::write_testset(world.testset, test_path);
    std::cout << "wrote " << world.datastore.size() << " examples to " << ds_path.string()
              << "\nwrote " << world.testset.size() << " tests to " << test_path.string()
              << "\n";
    return 0;
}

struct SelectArgs {
    std::string config_path;
    std::string datastore_path;
    std::string testset_path;
    std::string test_id;
    std::string cache_path;
    std::string fast_map_path;
    std::string out_path;
};

int cmd_select(const SelectArgs& args) {
    const bycs::SelectionConfig cfg =
        bycs::selection_config_from_json(load_json_file(args.config_path));
    const bycs::Datastore ds = bycs::load_datastore(args.datastore_path);
    require_clean_datastore(ds);
    const auto tests = bycs::load_testset(args.testset_path);
    bycs::check_embedding_dims(ds, tests);
    const bycs::TestInstance* test = nullptr;
    for (const auto& t : tests)
        if (t.id == args.test_id)
            test = &t;
    if (!test)
        throw bycs::validation_error("test id \"" + args.test_id + "\" not found in " +
                                     args.testset_path);

    const bycs::PromptTemplate tmpl = bycs::resolve_template(cfg);
    bycs::ModelSet models;
    if (cfg.inference_model)
        models.inference = bycs::make_model(*cfg.inference_model);
    if (cfg.inverse_model)
        models.inverse = bycs::make_model(*cfg.inverse_model);

    bycs::InverseCache cache;
    bycs::Bm25Index bm25;
    bycs::SelectionResources res;
    if (!args.cache_path.empty()) {
        cache.open(args.cache_path);
        res.cache = &cache;
    }
    const bool probing = cfg.method == bycs::Method::bycs ||
                         cfg.method == bycs::Method::oracle_bycs;
    if (cfg.method == bycs::Method::bm25 ||
        (probing && cfg.preselect_algo == bycs::PreselectAlgo::bm25)) {
        bm25 = bycs::bm25_build(ds, cfg.tokenizer);
        res.bm25 = &bm25;
    }
    bycs::FastSelectionMap fast_map;
    const bycs::FastSelectionMap* fast_map_ptr = nullptr;
    if (cfg.method == bycs::Method::bycs_fast) {
        if (args.fast_map_path.empty())
            throw bycs::validation_error("method bycs_fast requires --fast-map");
        fast_map = bycs::load_fast_map(args.fast_map_path);
        fast_map_ptr = &fast_map;
    }

    const bycs::SelectionResult result =
        bycs::select_examples(cfg, models, tmpl, *test, ds, res, fast_map_ptr);
    const std::string line = bycs::selection_result_to_json(result).dump();
    if (args.out_path.empty()) {
        std::cout << line << "\n";
    } else {
        std::ofstream out(args.out_path, std::ios::trunc);
        out << line << "\n";
        if (!out)
            throw bycs::validation_error("cannot write " + args.out_path);
    }
    return 0;
}

int cmd_precompute(const std::string& config_path, const std::string& datastore_path,
                   const std::string& out_path, const std::string& cache_path) {
    const bycs::SelectionConfig cfg =
        bycs::selection_config_from_json(load_json_file(config_path));
    const bycs::Datastore ds = bycs::load_datastore(datastore_path);
    require_clean_datastore(ds);
    const bycs::PromptTemplate tmpl = bycs::resolve_template(cfg);
    bycs::ModelSet models;
    if (!cfg.inverse_model)
        throw bycs::validation_error("precompute-fast requires inverse_model in the config");
    models.inverse = bycs::make_model(*cfg.inverse_model);
    if (cfg.inference_model)
        models.inference = bycs::make_model(*cfg.inference_model);

    bycs::InverseCache cache;
    bycs::Bm25Index bm25;
    bycs::SelectionResources res;
    if (!cache_path.empty()) {
        cache.open(cache_path);
        res.cache = &cache;
    }
    if (cfg.preselect_algo == bycs::PreselectAlgo::bm25) {
        bm25 = bycs::bm25_build(ds, cfg.tokenizer);
        res.bm25 = &bm25;
    }
    const bycs::FastSelectionMap map = bycs::precompute_fast(cfg, models, tmpl, ds, res);
    bycs::write_fast_map(map, out_path);
    std::cout << "wrote " << map.entries.size() << " precomputed selections to "
              << out_path << " (" << models.inverse->call_count()
              << " inverse calls)\n";
    return 0;
}

int cmd_evaluate(const std::string& spec_path, const std::string& cache_path) {
    const bycs::ExperimentSpec spec =
        bycs::experiment_spec_from_json(load_json_file(spec_path));
    bycs::InverseCache cache;
    bycs::InverseCache* cache_ptr = nullptr;
    if (!cache_path.empty()) {
        cache.open(cache_path);
        cache_ptr = &cache;
    }
    const bycs::EvaluationResults results =
        bycs::run_evaluation(spec, bycs::default_model_factory(), cache_ptr);
    bycs::emit_report(results, spec.output_dir);
    bool any_failed = false, any_backend = false;
    for (const auto& arm : results.arms) {
        if (arm.failed) {
            any_failed = true;
            any_backend = any_backend || arm.backend_failure;
            std::cout << arm.name << ": FAILED: " << arm.error << "\n";
        } else {
            std::cout << arm.name << ": " << bycs::to_string(results.spec.metric) << "="
                      << arm.metric_value << " mean_inverse_calls="
                      << arm.mean_inverse_calls << "\n";
        }
    }
    std::cout << "report written to " << spec.output_dir << "/results.json and results.md\n";
    if (any_backend)
        return 2;
    return any_failed ? 1 : 0;
}

int cmd_entropy(const std::string& scores_path, std::size_t bins) {
    std::ifstream in(scores_path);
    if (!in)
        throw bycs::validation_error("cannot open scores file: " + scores_path);
    std::vector<double> scores;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            scores.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw bycs::validation_error(scores_path + ":" + std::to_string(lineno) +
                                         ": not a number: " + line);
        }
    }
    const double h = bycs::score_entropy(scores, bins);
    std::cout << bycs::json{{"entropy", h}, {"bins", bins}, {"count", scores.size()}}.dump()
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian in-context example selection"};
    app.require_subcommand(1);

    std::string ingest_path;
    bool ingest_testset = false;
    auto* ingest = app.add_subcommand("ingest", "validate a datastore file and report violations");
    ingest->add_option("path", ingest_path, "JSONL datastore file")->required();
    ingest->add_flag("--testset", ingest_testset, "treat the file as a testset");

    bycs::WorldParams world;
    std::string world_out;
    auto* genworld = app.add_subcommand("genworld", "generate a synthetic cluster world");
    genworld->add_option("--clusters", world.clusters, "number of clusters")->required();
    genworld->add_option("--per-cluster", world.per_cluster, "examples per cluster")->required();
    genworld->add_option("--dim", world.embed_dim, "embedding dimension");
    genworld->add_option("--sep", world.cluster_separation, "distance between cluster centers");
    genworld->add_option("--noise", world.noise_p, "oracle corruption probability");
    genworld->add_option("--seed", world.seed, "world seed");
    genworld->add_option("--out", world_out, "output directory")->required();

    SelectArgs sel;
    auto* select = app.add_subcommand("select", "select in-context examples for one test instance");
    select->add_option("--config", sel.config_path, "selection config JSON")->required();
    select->add_option("--datastore", sel.datastore_path, "JSONL datastore")->required();
    select->add_option("--testset", sel.testset_path, "JSONL testset")->required();
    select->add_option("--test-id", sel.test_id, "test instance id")->required();
    select->add_option("--cache", sel.cache_path, "inverse-inference cache file");
    select->add_option("--fast-map", sel.fast_map_path, "precomputed selection map (bycs_fast)");
    select->add_option("--out", sel.out_path, "write the result here instead of stdout");

    std::string pre_config, pre_datastore, pre_out, pre_cache;
    auto* precompute = app.add_subcommand("precompute-fast",
                                          "precompute selections for every datastore example");
    precompute->add_option("--config", pre_config, "selection config JSON")->required();
    precompute->add_option("--datastore", pre_datastore, "JSONL datastore")->required();
    precompute->add_option("--out", pre_out, "output map file")->required();
    precompute->add_option("--cache", pre_cache, "inverse-inference cache file");

    std::string eval_spec, eval_cache;
    auto* evaluate = app.add_subcommand("evaluate", "run an experiment spec and emit reports");
    evaluate->add_option("--spec", eval_spec, "experiment spec JSON")->required();
    evaluate->add_option("--cache", eval_cache, "inverse-inference cache file");

    std::string entropy_scores;
    std::size_t entropy_bins = 20;
    auto* entropy = app.add_subcommand("entropy", "entropy of a score distribution");
    entropy->add_option("--scores", entropy_scores, "file with one score per line")->required();
    entropy->add_option("--bins", entropy_bins, "histogram bin count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest)
            return cmd_ingest(ingest_path, ingest_testset);
        if (*genworld)
            return cmd_genworld(world, world_out);
        if (*select)
            return cmd_select(sel);
        if (*precompute)
            return cmd_precompute(pre_config, pre_datastore, pre_out, pre_cache);
        if (*evaluate)
            return cmd_evaluate(eval_spec, eval_cache);
        if (*entropy)
            return cmd_entropy(entropy_scores, entropy_bins);
    } catch (const bycs::backend_error& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
