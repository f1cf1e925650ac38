#pragma once

#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "bycs/detail/rng.hpp"
#include "bycs/types.hpp"

namespace bycs {

/// k distinct ids sampled uniformly without replacement via a seeded partial
/// Fisher-Yates shuffle over the eligible ids in load order. The same seed
/// always yields the same list.
inline std::vector<std::string> random_select(const Datastore& ds, std::size_t k,
                                              std::uint64_t seed,
                                              const std::unordered_set<std::string>& exclude = {}) {
    std::vector<const std::string*> pool;
    pool.reserve(ds.examples.size());
    for (const auto& ex : ds.examples)
        if (!exclude.count(ex.id))
            pool.push_back(&ex.id);
    if (k > pool.size())
        throw validation_error("random_select: k=" + std::to_string(k) +
                               " exceeds eligible count " +
                               std::to_string(pool.size()));
    std::mt19937_64 rng(seed);
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(detail::uniform_index(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
        out.push_back(*pool[i]);
    }
    return out;
}

} // namespace bycs
