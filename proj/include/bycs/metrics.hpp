#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bycs/tokenize.hpp"
#include "bycs/types.hpp"

namespace bycs {

/// Jaccard coefficient over token collections. Set mode compares distinct
/// tokens; bag mode compares multisets (sum of per-token min counts over sum
/// of per-token max counts), so repeats sharpen the comparison. Two empty
/// collections count as identical (1.0); exactly one empty gives 0.0.
inline double jaccard(const TokenSequence& a, const TokenSequence& b, bool bag) {
    if (a.tokens.empty() && b.tokens.empty())
        return 1.0;
    if (a.tokens.empty() || b.tokens.empty())
        return 0.0;
    std::vector<std::string> sa = a.tokens, sb = b.tokens;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (!bag) {
        sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
        sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    }
    // two-pointer multiset intersection; with the dedup above it is the
    // plain set intersection
    std::size_t inter = 0, i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        if (sa[i] < sb[j]) {
            ++i;
        } else if (sb[j] < sa[i]) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

struct EditCounts {
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t ref_len = 0;

    std::size_t total() const { return substitutions + deletions + insertions; }
};

/// Minimum-cost alignment with unit costs. Equal-cost alignments are
/// disambiguated by preferring fewer substitutions, then fewer insertions,
/// so the returned counts are deterministic.
inline EditCounts align_edits(const TokenSequence& ref, const TokenSequence& hyp) {
    struct Cell {
        std::size_t total, subs, ins, dels;
    };
    const auto better = [](const Cell& x, const Cell& y) {
        if (x.total != y.total)
            return x.total < y.total;
        if (x.subs != y.subs)
            return x.subs < y.subs;
        return x.ins < y.ins;
    };
    const std::size_t n = ref.tokens.size(), m = hyp.tokens.size();
    std::vector<Cell> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j)
        prev[j] = {j, 0, j, 0};
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = {i, 0, 0, i};
        for (std::size_t j = 1; j <= m; ++j) {
            Cell best = prev[j - 1];
            if (ref.tokens[i - 1] == hyp.tokens[j - 1]) {
                // match, no cost
            } else {
                best.total += 1;
                best.subs += 1;
            }
            Cell del = prev[j];
            del.total += 1;
            del.dels += 1;
            if (better(del, best))
                best = del;
            Cell ins = cur[j - 1];
            ins.total += 1;
            ins.ins += 1;
            if (better(ins, best))
                best = ins;
            cur[j] = best;
        }
        std::swap(prev, cur);
    }
    const Cell& final = prev[m];
    return EditCounts{final.subs, final.dels, final.ins, n};
}

/// (S + D + I) / |ref| under the given tokenizer. Repeats in the hypothesis
/// are kept verbatim, so insert-heavy outputs can exceed 1.0.
inline double wer(const std::string& ref, const std::string& hyp,
                  TokenizerMode mode) {
    const TokenSequence r = tokenize(ref, mode);
    if (r.tokens.empty())
        throw validation_error("wer: reference tokenizes to zero tokens");
    const EditCounts e = align_edits(r, tokenize(hyp, mode));
    return static_cast<double>(e.total()) / static_cast<double>(e.ref_len);
}

/// Pooled corpus WER: edit counts and reference lengths are summed over all
/// pairs before dividing, not averaged per utterance.
inline double corpus_wer(const std::vector<std::pair<std::string, std::string>>& pairs,
                         TokenizerMode mode) {
    std::size_t errs = 0, ref_total = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const TokenSequence r = tokenize(pairs[i].first, mode);
        if (r.tokens.empty())
            throw validation_error("corpus_wer: empty reference at pair index " +
                                   std::to_string(i));
        const EditCounts e = align_edits(r, tokenize(pairs[i].second, mode));
        errs += e.total();
        ref_total += e.ref_len;
    }
    if (ref_total == 0)
        throw validation_error("corpus_wer: no reference tokens");
    return static_cast<double>(errs) / static_cast<double>(ref_total);
}

inline double embedding_distance(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.size() != b.size())
        throw validation_error("embedding_distance: length mismatch: " +
                               std::to_string(a.size()) + " vs " +
                               std::to_string(b.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// External text -> vector provider, required by the embedding_distance
/// similarity measure. The library never computes embeddings itself.
using Embedder = std::function<std::vector<double>(const std::string&)>;

struct ScoringContext {
    TokenizerMode tokenizer = TokenizerMode::whitespace_word;
    Embedder embedder; // may be empty unless embedding_distance is used
};

/// Similarity between a candidate's true label and its probe output.
/// Jaccard variants score in [0,1]; embedding distance is negated so that
/// higher is always better (only the ordering matters downstream).
inline double similarity_score(Similarity measure, const std::string& label,
                               const std::string& hyp, const ScoringContext& ctx) {
    switch (measure) {
        case Similarity::jaccard_set:
            return jaccard(tokenize(label, ctx.tokenizer),
                           tokenize(hyp, ctx.tokenizer), /*bag=*/false);
        case Similarity::jaccard_bag:
            return jaccard(tokenize(label, ctx.tokenizer),
                           tokenize(hyp, ctx.tokenizer), /*bag=*/true);
        case Similarity::embedding_distance: {
            if (!ctx.embedder)
                throw validation_error(
                    "similarity measure embedding_distance requires an embedder");
            return -embedding_distance(ctx.embedder(label), ctx.embedder(hyp));
        }
    }
    throw validation_error("unknown similarity measure");
}

} // namespace bycs
