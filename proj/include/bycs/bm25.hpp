#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bycs/tokenize.hpp"
#include "bycs/types.hpp"

namespace bycs {

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
    double idf_floor_epsilon = 0.25;
};

struct Bm25Index {
    std::vector<std::string> doc_ids;
    std::vector<std::unordered_map<std::string, std::size_t>> doc_token_counts;
    std::vector<std::size_t> doc_lens;
    double avg_len = 0.0;
    std::unordered_map<std::string, std::size_t> df;
    std::unordered_map<std::string, double> idf;
    Bm25Params params;
    TokenizerMode mode = TokenizerMode::whitespace_word;
};

/// Builds an okapi index over tokenize(example.input).
/// idf(t) = ln((N - df + 0.5) / (df + 0.5)); terms appearing in more than
/// half the corpus get a negative raw idf, which is replaced by
/// idf_floor_epsilon times the mean of the positive idfs (0 if there are
/// none) so no term can push a score negative.
inline Bm25Index bm25_build(const Datastore& ds, TokenizerMode mode,
                            Bm25Params params = {}) {
    if (ds.examples.empty())
        throw validation_error("bm25_build: empty datastore");
    Bm25Index index;
    index.params = params;
    index.mode = mode;
    std::size_t len_total = 0;
    for (const auto& ex : ds.examples) {
        const TokenSequence toks = tokenize(ex.input, mode);
        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& t : toks.tokens)
            ++counts[t];
        for (const auto& [t, cnt] : counts)
            ++index.df[t];
        index.doc_ids.push_back(ex.id);
        index.doc_lens.push_back(toks.tokens.size());
        len_total += toks.tokens.size();
        index.doc_token_counts.push_back(std::move(counts));
    }
    index.avg_len = static_cast<double>(len_total) /
                    static_cast<double>(ds.examples.size());
    const double n_docs = static_cast<double>(ds.examples.size());
    double positive_sum = 0.0;
    std::size_t positive_count = 0;
    for (const auto& [t, df] : index.df) {
        const double idf = std::log((n_docs - static_cast<double>(df) + 0.5) /
                                    (static_cast<double>(df) + 0.5));
        index.idf[t] = idf;
        if (idf > 0.0) {
            positive_sum += idf;
            ++positive_count;
        }
    }
    const double mean_positive =
        positive_count > 0 ? positive_sum / static_cast<double>(positive_count) : 0.0;
    const double floor = params.idf_floor_epsilon * mean_positive;
    for (auto& [t, idf] : index.idf)
        if (idf < 0.0)
            idf = floor;
    return index;
}

inline double bm25_score_doc(const Bm25Index& index, std::size_t doc,
                             const std::vector<std::string>& query_tokens) {
    const auto& counts = index.doc_token_counts[doc];
    const double norm_len =
        index.avg_len > 0.0
            ? static_cast<double>(index.doc_lens[doc]) / index.avg_len
            : 0.0;
    double score = 0.0;
    for (const auto& t : query_tokens) {
        const auto idf_it = index.idf.find(t);
        if (idf_it == index.idf.end())
            continue;
        const auto freq_it = counts.find(t);
        if (freq_it == counts.end())
            continue;
        const double f = static_cast<double>(freq_it->second);
        const double k1 = index.params.k1, b = index.params.b;
        score += idf_it->second * f * (k1 + 1.0) /
                 (f + k1 * (1.0 - b + b * norm_len));
    }
    return score;
}

/// Top-n ids by okapi score, descending; ties broken by ascending id.
inline std::vector<std::string> bm25_rank(const Bm25Index& index,
                                          const std::string& query, std::size_t n,
                                          const std::unordered_set<std::string>& exclude = {}) {
    const TokenSequence q = tokenize(query, index.mode);
    std::vector<std::pair<double, const std::string*>> scored;
    for (std::size_t d = 0; d < index.doc_ids.size(); ++d) {
        if (exclude.count(index.doc_ids[d]))
            continue;
        scored.emplace_back(bm25_score_doc(index, d, q.tokens), &index.doc_ids[d]);
    }
    if (n > scored.size())
        throw validation_error("bm25_rank: n=" + std::to_string(n) +
                               " exceeds eligible count " +
                               std::to_string(scored.size()));
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first > b.first;
        return *a.second < *b.second;
    });
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(*scored[i].second);
    return out;
}

} // namespace bycs
