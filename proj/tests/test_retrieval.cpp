#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "bycs/bm25.hpp"
#include "bycs/knn.hpp"
#include "bycs/sample.hpp"

using namespace bycs;

namespace {

Datastore embedded_store(const std::vector<std::pair<std::string, std::vector<double>>>& points) {
    Datastore ds;
    ds.name = "points";
    for (const auto& [id, emb] : points) {
        ds.examples.push_back({id, "input " + id, "label " + id, emb, {}});
        ds.embedding_dim = emb.size();
    }
    return ds;
}

Datastore text_store(const std::vector<std::pair<std::string, std::string>>& docs) {
    Datastore ds;
    ds.name = "docs";
    for (const auto& [id, text] : docs)
        ds.examples.push_back({id, text, "label " + id, std::nullopt, {}});
    return ds;
}

} // namespace

TEST_CASE("knn_rank orders by distance") {
    const Datastore ds = embedded_store({
        {"far", {3.0, 0.0}},
        {"near", {1.0, 0.0}},
        {"mid", {2.0, 0.0}},
    });
    CHECK(knn_rank({0.0, 0.0}, ds, 2) == std::vector<std::string>{"near", "mid"});
    CHECK(knn_rank({0.0, 0.0}, ds, 3) ==
          std::vector<std::string>{"near", "mid", "far"});
}

TEST_CASE("knn_rank breaks exact ties by id") {
    const Datastore ds = embedded_store({
        {"b", {1.0, 0.0}},
        {"a", {0.0, 1.0}},
        {"c", {0.0, -1.0}},
    });
    CHECK(knn_rank({0.0, 0.0}, ds, 3) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("knn_rank errors") {
    Datastore ds = embedded_store({{"a", {0.0, 0.0}}, {"b", {1.0, 1.0}}});
    CHECK_THROWS_AS(knn_rank({0.0, 0.0}, ds, 3), validation_error);
    ds.examples.push_back({"naked", "x", "y", std::nullopt, {}});
    CHECK_THROWS_WITH(knn_rank({0.0, 0.0}, ds, 1),
                      Catch::Matchers::ContainsSubstring("naked"));
    // excluding the embedding-less record makes it rankable again
    CHECK(knn_rank({0.0, 0.0}, ds, 1, {"naked"}) == std::vector<std::string>{"a"});
}

TEST_CASE("knn_rank matches a brute-force sort on random instances") {
    std::mt19937_64 seed_rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::mt19937 rng(static_cast<unsigned>(seed_rng()));
        std::uniform_real_distribution<double> coord(-1.0, 1.0);
        std::vector<std::pair<std::string, std::vector<double>>> points;
        for (int i = 0; i < 50; ++i) {
            std::vector<double> v(8);
            for (auto& x : v)
                x = coord(rng);
            points.emplace_back("p" + std::to_string(i), v);
        }
        const Datastore ds = embedded_store(points);
        std::vector<double> query(8);
        for (auto& x : query)
            x = coord(rng);

        // brute force: full sort over (distance, id)
        std::vector<std::pair<double, std::string>> all;
        for (const auto& [id, emb] : points) {
            double d2 = 0;
            for (std::size_t k = 0; k < emb.size(); ++k)
                d2 += (emb[k] - query[k]) * (emb[k] - query[k]);
            all.emplace_back(std::sqrt(d2), id);
        }
        std::sort(all.begin(), all.end());
        std::vector<std::string> want;
        for (int i = 0; i < 10; ++i)
            want.push_back(all[i].second);
        REQUIRE(knn_rank(query, ds, 10) == want);
    }
}

TEST_CASE("bm25_build idf formula") {
    const Datastore ds = text_store({
        {"d1", "apple banana"},
        {"d2", "banana cherry"},
        {"d3", "cherry durian"},
    });
    const Bm25Index index = bm25_build(ds, TokenizerMode::whitespace_word);
    // term in exactly one of three docs
    CHECK(index.idf.at("apple") == Catch::Approx(std::log(2.5 / 1.5)));
    CHECK(index.df.at("banana") == 2);
    CHECK(index.avg_len == Catch::Approx(2.0));
}

TEST_CASE("bm25_build floors negative idf") {
    const Datastore ds = text_store({
        {"d1", "common rare"},
        {"d2", "common other"},
    });
    const Bm25Index index = bm25_build(ds, TokenizerMode::whitespace_word);
    // df=2 of N=2: raw idf = ln(0.5/2.5) < 0, replaced by eps * mean(positive).
    // Single-doc terms here have idf ln(1.5/1.5) = 0, so no idf is positive
    // and the floor collapses to 0.
    CHECK(index.idf.at("rare") == 0.0);
    CHECK(index.idf.at("common") == 0.0);

    const Datastore ds3 = text_store({
        {"d1", "everywhere unique1"},
        {"d2", "everywhere unique2"},
        {"d3", "everywhere unique3"},
    });
    const Bm25Index i3 = bm25_build(ds3, TokenizerMode::whitespace_word);
    const double positive = std::log(2.5 / 1.5); // each unique term
    CHECK(i3.idf.at("everywhere") == Catch::Approx(0.25 * positive));
    CHECK(i3.idf.at("everywhere") > 0.0);
}

TEST_CASE("bm25 empty-token document lowers avg_len") {
    const Datastore ds = text_store({{"d1", "one two"}, {"d2", "..."}});
    const Bm25Index index = bm25_build(ds, TokenizerMode::whitespace_word);
    CHECK(index.doc_lens[1] == 0);
    CHECK(index.avg_len == Catch::Approx(1.0));
}

TEST_CASE("bm25_rank scores match direct formula evaluation") {
    // nested vocabulary: delta has positive idf, gamma lands exactly at 0
    // (df = N/2), alpha and beta go negative and get floored
    const Datastore ds = text_store({
        {"d1", "alpha beta gamma delta"},
        {"d2", "alpha beta gamma"},
        {"d3", "alpha beta"},
        {"d4", "alpha"},
    });
    const Bm25Index index = bm25_build(ds, TokenizerMode::whitespace_word);
    const std::string query = "beta delta";

    // direct evaluation, recomputed from scratch
    const std::map<std::string, int> df{{"alpha", 4}, {"beta", 3}, {"gamma", 2}, {"delta", 1}};
    const auto direct_idf = [&](const std::string& term) {
        double positive_sum = 0;
        int positive_n = 0;
        for (const auto& [t, d] : df) {
            const double idf = std::log((4.0 - d + 0.5) / (d + 0.5));
            if (idf > 0) {
                positive_sum += idf;
                ++positive_n;
            }
        }
        const double raw = std::log((4.0 - df.at(term) + 0.5) / (df.at(term) + 0.5));
        return raw < 0 ? 0.25 * (positive_sum / positive_n) : raw;
    };
    const auto direct_score = [&](double f, double dl, const std::string& term) {
        const double avg = (4.0 + 3.0 + 2.0 + 1.0) / 4.0;
        return direct_idf(term) * f * 2.5 / (f + 1.5 * (1.0 - 0.75 + 0.75 * dl / avg));
    };
    const double want_d1 = direct_score(1, 4, "beta") + direct_score(1, 4, "delta");
    const double want_d2 = direct_score(1, 3, "beta");
    const double want_d3 = direct_score(1, 2, "beta");

    const TokenSequence q = tokenize(query, TokenizerMode::whitespace_word);
    CHECK(bm25_score_doc(index, 0, q.tokens) == Catch::Approx(want_d1).margin(1e-9));
    CHECK(bm25_score_doc(index, 1, q.tokens) == Catch::Approx(want_d2).margin(1e-9));
    CHECK(bm25_score_doc(index, 2, q.tokens) == Catch::Approx(want_d3).margin(1e-9));
    CHECK(bm25_score_doc(index, 3, q.tokens) == 0.0);
    CHECK(want_d1 > want_d3);
    CHECK(want_d3 > want_d2); // shorter document wins on the shared term

    CHECK(bm25_rank(index, query, 4) ==
          std::vector<std::string>{"d1", "d3", "d2", "d4"});
}

TEST_CASE("bm25_rank: unique term puts its document first") {
    const Datastore ds = text_store({
        {"d1", "alpha beta"},
        {"d2", "beta gamma"},
        {"d3", "gamma delta special"},
    });
    const Bm25Index index = bm25_build(ds, TokenizerMode::whitespace_word);
    CHECK(bm25_rank(index, "special", 1).front() == "d3");
}

TEST_CASE("bm25_rank: query with no corpus terms ties at zero, ids ascending") {
    const Datastore ds = text_store({{"dz", "one"}, {"da", "two"}, {"dm", "three"}});
    const Bm25Index index = bm25_build(ds, TokenizerMode::whitespace_word);
    CHECK(bm25_rank(index, "nothing matches", 3) ==
          std::vector<std::string>{"da", "dm", "dz"});
    CHECK_THROWS_AS(bm25_rank(index, "x", 4), validation_error);
}

TEST_CASE("bm25 ordering is stable under duplicating a query-disjoint document") {
    const Datastore ds = text_store({
        {"d1", "apple filler filler"},
        {"d2", "banana filler filler"},
        {"d3", "plain filler filler"},
    });
    Datastore bigger = ds;
    bigger.examples.push_back({"zz_pad", "plain filler filler", "l", std::nullopt, {}});
    const Bm25Index small = bm25_build(ds, TokenizerMode::whitespace_word);
    const Bm25Index big = bm25_build(bigger, TokenizerMode::whitespace_word);
    // the repeated query term makes d1 outscore d2 at any corpus size
    const auto base = bm25_rank(small, "apple apple banana", 3);
    auto grown = bm25_rank(big, "apple apple banana", 4);
    CHECK(base == std::vector<std::string>{"d1", "d2", "d3"});
    // the duplicate only lands among the zero-score ties
    CHECK(grown == std::vector<std::string>{"d1", "d2", "d3", "zz_pad"});
}

TEST_CASE("random_select determinism and uniformity") {
    Datastore ds;
    for (int i = 0; i < 5; ++i)
        ds.examples.push_back({"r" + std::to_string(i), "x", "y", std::nullopt, {}});

    CHECK(random_select(ds, 3, 1234) == random_select(ds, 3, 1234));

    auto all = random_select(ds, 5, 99);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<std::string>{"r0", "r1", "r2", "r3", "r4"});

    std::map<std::string, int> counts;
    for (std::uint64_t seed = 0; seed < 10000; ++seed)
        ++counts[random_select(ds, 1, seed).front()];
    for (const auto& [id, n] : counts) {
        CHECK(n > 2000 - 150);
        CHECK(n < 2000 + 150);
    }
}

TEST_CASE("random_select respects exclusions and never duplicates") {
    Datastore ds;
    for (int i = 0; i < 10; ++i)
        ds.examples.push_back({"r" + std::to_string(i), "x", "y", std::nullopt, {}});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto picks = random_select(ds, 4, seed, {"r0", "r5"});
        std::set<std::string> unique(picks.begin(), picks.end());
        REQUIRE(unique.size() == picks.size());
        CHECK(!unique.count("r0"));
        CHECK(!unique.count("r5"));
    }
    CHECK_THROWS_AS(random_select(ds, 9, 0, {"r0", "r5"}), validation_error);
}
