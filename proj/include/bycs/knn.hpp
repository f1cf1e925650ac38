#pragma once

#include <algorithm>
#include <string>
#include <unordered_set>
#include <vector>

#include "bycs/metrics.hpp"
#include "bycs/types.hpp"

namespace bycs {

/// Exact k-nearest-neighbour ranking by Euclidean distance: the n eligible
/// ids closest to the query, ascending by distance, exact ties broken by
/// ascending id. Linear scan plus sort; datastores here are desk-scale.
inline std::vector<std::string> knn_rank(const std::vector<double>& query_embedding,
                                         const Datastore& ds, std::size_t n,
                                         const std::unordered_set<std::string>& exclude = {}) {
    std::vector<std::pair<double, const Example*>> scored;
    std::vector<std::string> missing;
    for (const auto& ex : ds.examples) {
        if (exclude.count(ex.id))
            continue;
        if (!ex.embedding || ex.embedding->size() != query_embedding.size()) {
            missing.push_back(ex.id);
            continue;
        }
        double dist2 = 0.0;
        for (std::size_t i = 0; i < query_embedding.size(); ++i) {
            const double d = (*ex.embedding)[i] - query_embedding[i];
            dist2 += d * d;
        }
        scored.emplace_back(dist2, &ex);
    }
    if (!missing.empty()) {
        std::string msg = "knn_rank: examples without usable embeddings:";
        for (const auto& id : missing)
            msg += " " + id;
        throw validation_error(msg);
    }
    if (n > scored.size())
        throw validation_error("knn_rank: n=" + std::to_string(n) +
                               " exceeds eligible count " +
                               std::to_string(scored.size()));
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first < b.first;
        return a.second->id < b.second->id;
    });
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(scored[i].second->id);
    return out;
}

} // namespace bycs
