#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bycs/evaluate.hpp"
#include "bycs/remote.hpp"
#include "bycs/world.hpp"

using namespace bycs;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "bycs_harness_tests" / name;
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json model_json(const std::string& id, double noise_p, std::uint64_t seed) {
    return json{{"id", id}, {"kind", "cluster_oracle"}, {"noise_p", noise_p}, {"seed", seed}};
}

// Writes a world to disk and returns (datastore path, testset path).
std::pair<std::string, std::string> write_world(const ClusterWorld& world,
                                                const std::filesystem::path& dir) {
    const auto ds_path = dir / "datastore.jsonl";
    const auto test_path = dir / "testset.jsonl";
    write_datastore(world.datastore, ds_path);
    write_testset(world.testset, test_path);
    return {ds_path.string(), test_path.string()};
}

} // namespace

TEST_CASE("generate_cluster_world shapes and determinism") {
    const WorldParams params{5, 10, 8, 10.0, 0.0, 42};
    const ClusterWorld world = generate_cluster_world(params);
    CHECK(world.datastore.size() == 50);
    CHECK(world.testset.size() == 5);
    CHECK(world.datastore.embedding_dim == 8);
    for (const auto& ex : world.datastore.examples) {
        CHECK(grammar_cluster(ex.input) == ex.meta.at("cluster"));
        CHECK(grammar_cluster(ex.label) == ex.meta.at("cluster"));
    }

    const auto dir_a = temp_dir("world_a");
    const auto dir_b = temp_dir("world_b");
    write_world(world, dir_a);
    write_world(generate_cluster_world(params), dir_b);
    CHECK(slurp(dir_a / "datastore.jsonl") == slurp(dir_b / "datastore.jsonl"));
    CHECK(slurp(dir_a / "testset.jsonl") == slurp(dir_b / "testset.jsonl"));

    CHECK_THROWS_AS(generate_cluster_world(WorldParams{5, 2, 3, 1.0, 0.0, 0}),
                    validation_error);
}

TEST_CASE("cluster centers are mutually equidistant") {
    const WorldParams params{4, 1, 6, 7.5, 0.0, 0};
    // with jitter removed analytically: centers are (sep/sqrt(2)) * e_c
    const double scale = 7.5 / std::sqrt(2.0);
    for (std::size_t a = 0; a < params.clusters; ++a)
        for (std::size_t b = a + 1; b < params.clusters; ++b) {
            std::vector<double> ca(params.embed_dim, 0.0), cb(params.embed_dim, 0.0);
            ca[a] = scale;
            cb[b] = scale;
            CHECK(embedding_distance(ca, cb) == Catch::Approx(7.5));
        }
}

TEST_CASE("well-separated worlds put nearest neighbours in the right cluster") {
    // separation 10 with unit jitter: knn(5) from any test is essentially
    // always >= 4 same-cluster
    std::size_t checks = 0, good = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const ClusterWorld world =
            generate_cluster_world(WorldParams{5, 10, 8, 10.0, 0.0, seed});
        for (const auto& test : world.testset) {
            const auto ids = knn_rank(*test.embedding, world.datastore, 5);
            std::size_t same = 0;
            for (const auto& id : ids)
                if (world.datastore.find(id)->meta.at("cluster") ==
                    grammar_cluster(test.input))
                    ++same;
            ++checks;
            if (same >= 4)
                ++good;
        }
    }
    CHECK(static_cast<double>(good) / static_cast<double>(checks) >= 0.99);
}

TEST_CASE("score_entropy") {
    CHECK(score_entropy({0.7, 0.7, 0.7, 0.7}, 20) == 0.0);
    CHECK(score_entropy({0.42}, 5) == 0.0);
    CHECK(score_entropy({0.125, 0.375, 0.625, 0.875}, 4) ==
          Catch::Approx(std::log(4.0)).margin(1e-12));
    CHECK(score_entropy({0.1, 0.1, 0.9, 0.9}, 2) ==
          Catch::Approx(std::log(2.0)).margin(1e-12));
    CHECK_THROWS_AS(score_entropy({}, 4), validation_error);
    CHECK_THROWS_AS(score_entropy({0.1, 0.2}, 0), validation_error);

    // entropy never exceeds ln(bins)
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> scores(1 + rng() % 64);
        for (auto& s : scores)
            s = dist(rng);
        const std::size_t bins = 1 + rng() % 16;
        const double h = score_entropy(scores, bins);
        REQUIRE(h >= 0.0);
        REQUIRE(h <= std::log(static_cast<double>(bins)) + 1e-12);
    }
}

TEST_CASE("normalize_answer") {
    CHECK(normalize_answer("Number.", Normalizer::lower_strip_punct) == "number");
    CHECK(normalize_answer("  negative. ", Normalizer::lower_strip_punct) == "negative");
    CHECK(normalize_answer("Number.", Normalizer::exact) == "Number.");
    CHECK(normalize_answer("a:2:x y", Normalizer::lower_strip_punct) == "a:2:x y");
}

TEST_CASE("run_evaluation: perfect outputs give accuracy 1 and wer 0") {
    // single-cluster world: any selected example shares the query's cluster,
    // so the oracle answers every test with its reference
    const ClusterWorld world = generate_cluster_world(WorldParams{1, 6, 4, 10.0, 0.0, 8});
    const auto dir = temp_dir("perfect");
    const auto [ds_path, test_path] = write_world(world, dir);

    json spec_json{
        {"datastore", ds_path},
        {"testset", test_path},
        {"seed", 4},
        {"metric", "accuracy"},
        {"arms", json::array({json{
            {"name", "random"},
            {"config", json{{"method", "random"},
                            {"k", 1},
                            {"inference_model", model_json("oracle", 0.0, 8)}}}}})}};
    ExperimentSpec spec = experiment_spec_from_json(spec_json);
    EvaluationResults results = run_evaluation(spec, default_model_factory());
    REQUIRE(results.arms.size() == 1);
    REQUIRE(!results.arms[0].failed);
    CHECK(results.arms[0].metric_value == 1.0);
    CHECK(results.arms[0].mean_inverse_calls == 0.0);
    CHECK(results.arms[0].tests.size() == 3); // one test, three random seeds

    spec_json["metric"] = "wer";
    spec = experiment_spec_from_json(spec_json);
    results = run_evaluation(spec, default_model_factory());
    REQUIRE(!results.arms[0].failed);
    CHECK(results.arms[0].metric_value == 0.0);
}

TEST_CASE("run_evaluation: noise-free oracle-first-round outruns seeded random") {
    const ClusterWorld world = generate_cluster_world(WorldParams{5, 10, 8, 10.0, 0.0, 77});
    const auto dir = temp_dir("arms");
    const auto [ds_path, test_path] = write_world(world, dir);

    const json spec_json{
        {"datastore", ds_path},
        {"testset", test_path},
        {"seed", 3},
        {"metric", "accuracy"},
        {"arms",
         json::array(
             {json{{"name", "random"},
                   {"config", json{{"method", "random"},
                                   {"k", 1},
                                   {"inference_model", model_json("oracle-inf", 0.0, 77)}}}},
              json{{"name", "bycs"},
                   {"config",
                    json{{"method", "bycs"},
                         {"k", 1},
                         {"preselect_n", 8},
                         {"first_round", "oracle"},
                         {"inference_model", model_json("oracle-inf", 0.0, 77)},
                         {"inverse_model", model_json("oracle-inv", 0.0, 77)}}}}})}};
    const ExperimentSpec spec = experiment_spec_from_json(spec_json);
    const EvaluationResults results = run_evaluation(spec, default_model_factory());
    REQUIRE(results.arms.size() == 2);
    REQUIRE(!results.arms[0].failed);
    REQUIRE(!results.arms[1].failed);
    CHECK(results.arms[1].metric_value == 1.0);
    CHECK(results.arms[1].metric_value > results.arms[0].metric_value);
    CHECK(results.arms[1].mean_inverse_calls == 8.0);
    // probing arm reports the entropy of its pooled score distribution
    CHECK(results.arms[1].entropy.has_value());
    CHECK(!results.arms[0].entropy.has_value());
}

TEST_CASE("run_evaluation isolates arm failures") {
    // single cluster: the surviving random arm must score a clean 1.0
    const ClusterWorld world = generate_cluster_world(WorldParams{1, 6, 4, 10.0, 0.0, 12});
    const auto dir = temp_dir("failures");
    const auto [ds_path, test_path] = write_world(world, dir);
    const json spec_json{
        {"datastore", ds_path},
        {"testset", test_path},
        {"metric", "accuracy"},
        {"arms",
         json::array(
             {json{{"name", "bad"},
                   {"config",
                    json{{"method", "bycs"},
                         {"k", 1},
                         {"preselect_n", 100}, // larger than the store
                         {"first_round", "oracle"},
                         {"inference_model", model_json("o1", 0.0, 12)},
                         {"inverse_model", model_json("o2", 0.0, 12)}}}},
              json{{"name", "good"},
                   {"config", json{{"method", "random"},
                                   {"k", 1},
                                   {"inference_model", model_json("o1", 0.0, 12)}}}}})}};
    const EvaluationResults results =
        run_evaluation(experiment_spec_from_json(spec_json), default_model_factory());
    REQUIRE(results.arms.size() == 2);
    CHECK(results.arms[0].failed);
    CHECK(!results.arms[0].error.empty());
    CHECK(!results.arms[1].failed);
    CHECK(results.arms[1].metric_value == 1.0);
}

TEST_CASE("evaluation is replayable and parallelism-independent byte for byte") {
    const ClusterWorld world = generate_cluster_world(WorldParams{3, 6, 4, 8.0, 0.2, 70});
    const auto dir = temp_dir("replay_eval");
    const auto [ds_path, test_path] = write_world(world, dir);
    const auto replay_path = (dir / "replay.jsonl").string();

    const auto make_spec_json = [&](int parallelism) {
        json model{{"id", "replayed"}, {"kind", "replay_log"}, {"path", replay_path}};
        return json{
            {"datastore", ds_path},
            {"testset", test_path},
            {"seed", 9},
            {"metric", "accuracy"},
            {"parallelism", parallelism},
            {"arms",
             json::array(
                 {json{{"name", "random"},
                       {"config", json{{"method", "random"}, {"k", 1},
                                       {"inference_model", model}}}},
                  json{{"name", "bycs"},
                       {"config", json{{"method", "bycs"},
                                       {"k", 2},
                                       {"preselect_n", 6},
                                       {"first_round", "default"},
                                       {"inference_model", model},
                                       {"inverse_model", model}}}}})}};
    };

    // pass 1: record the oracle's answers into the replay log
    auto log = std::make_shared<ReplayLog>();
    const ModelFactory recording_factory = [&](const ModelSpec& spec) {
        auto inner = std::make_shared<ClusterOracleClient>(world_oracle_spec(world, spec.id));
        return std::make_shared<RecordingClient>(spec, inner, log);
    };
    const ExperimentSpec record_spec =
        experiment_spec_from_json(make_spec_json(1));
    const EvaluationResults recorded = run_evaluation(record_spec, recording_factory);
    for (const auto& arm : recorded.arms)
        REQUIRE(!arm.failed);
    log->save(replay_path);

    // passes 2 and 3: replay at parallelism 1 and 8 into separate dirs
    const auto out1 = temp_dir("replay_eval_p1");
    const auto out8 = temp_dir("replay_eval_p8");
    const EvaluationResults r1 =
        run_evaluation(experiment_spec_from_json(make_spec_json(1)), default_model_factory());
    emit_report(r1, out1);
    const EvaluationResults r8 =
        run_evaluation(experiment_spec_from_json(make_spec_json(8)), default_model_factory());
    emit_report(r8, out8);
    CHECK(slurp(out1 / "results.json") == slurp(out8 / "results.json"));
    CHECK(slurp(out1 / "results.md") == slurp(out8 / "results.md"));

    // replayed results equal the recorded ones
    CHECK(results_to_json(r1).at("arms") == results_to_json(recorded).at("arms"));

    // emitting again is byte-identical
    const auto out_again = temp_dir("replay_eval_again");
    emit_report(r1, out_again);
    CHECK(slurp(out1 / "results.json") == slurp(out_again / "results.json"));
}

TEST_CASE("metrics recomputed from results.json agree with the reported values") {
    const ClusterWorld world = generate_cluster_world(WorldParams{3, 5, 4, 6.0, 0.25, 31});
    const auto dir = temp_dir("recompute");
    const auto [ds_path, test_path] = write_world(world, dir);
    const json spec_json{
        {"datastore", ds_path},
        {"testset", test_path},
        {"seed", 2},
        {"metric", "accuracy"},
        {"arms",
         json::array({json{
             {"name", "bycs"},
             {"config", json{{"method", "bycs"},
                             {"k", 1},
                             {"preselect_n", 5},
                             {"first_round", "default"},
                             {"inference_model", model_json("oi", 0.25, 31)},
                             {"inverse_model", model_json("ov", 0.25, 31)}}}}})}};
    const ExperimentSpec spec = experiment_spec_from_json(spec_json);
    const EvaluationResults results = run_evaluation(spec, default_model_factory());
    REQUIRE(!results.arms[0].failed);

    const json j = results_to_json(results);
    const json& tests = j.at("arms").at(0).at("tests");
    std::size_t hits = 0;
    for (const auto& rec : tests) {
        const bool correct =
            normalize_answer(rec.at("output").get<std::string>(), spec.normalizer) ==
            normalize_answer(rec.at("reference").get<std::string>(), spec.normalizer);
        REQUIRE(correct == rec.at("correct").get<bool>());
        hits += correct ? 1 : 0;
    }
    CHECK(static_cast<double>(hits) / tests.size() ==
          Catch::Approx(results.arms[0].metric_value).margin(1e-12));

    // and the same check for pooled corpus WER
    json wer_spec_json = spec_json;
    wer_spec_json["metric"] = "wer";
    const ExperimentSpec wer_spec = experiment_spec_from_json(wer_spec_json);
    const EvaluationResults wer_results = run_evaluation(wer_spec, default_model_factory());
    REQUIRE(!wer_results.arms[0].failed);
    std::vector<std::pair<std::string, std::string>> pairs;
    const json wer_json = results_to_json(wer_results);
    for (const auto& rec : wer_json.at("arms").at(0).at("tests"))
        pairs.emplace_back(rec.at("reference").get<std::string>(),
                           rec.at("output").get<std::string>());
    CHECK(corpus_wer(pairs, TokenizerMode::whitespace_word) ==
          Catch::Approx(wer_results.arms[0].metric_value).margin(1e-12));
}

TEST_CASE("emit_report writes one row per arm and switches the metric header") {
    const ClusterWorld world = generate_cluster_world(WorldParams{1, 4, 4, 10.0, 0.0, 2});
    const auto dir = temp_dir("report");
    const auto [ds_path, test_path] = write_world(world, dir);
    json spec_json{
        {"datastore", ds_path},
        {"testset", test_path},
        {"metric", "accuracy"},
        {"arms", json::array({json{{"name", "only"},
                                   {"config", json{{"method", "random"},
                                                   {"k", 1},
                                                   {"inference_model", model_json("o", 0.0, 2)}}}}})}};
    const auto out_acc = temp_dir("report_acc");
    emit_report(run_evaluation(experiment_spec_from_json(spec_json),
                               default_model_factory()),
                out_acc);
    const std::string md_acc = slurp(out_acc / "results.md");
    CHECK_THAT(md_acc, Catch::Matchers::ContainsSubstring("%Acc"));
    CHECK(std::count(md_acc.begin(), md_acc.end(), '\n') == 3); // header + rule + 1 row

    spec_json["metric"] = "wer";
    const auto out_wer = temp_dir("report_wer");
    emit_report(run_evaluation(experiment_spec_from_json(spec_json),
                               default_model_factory()),
                out_wer);
    CHECK_THAT(slurp(out_wer / "results.md"), Catch::Matchers::ContainsSubstring("%WER"));
}
