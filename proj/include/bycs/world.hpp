#pragma once

#include <random>
#include <string>
#include <vector>

#include "bycs/detail/rng.hpp"
#include "bycs/types.hpp"

namespace bycs {

/// Parameters of the synthetic cluster world used for end-to-end checks.
/// noise_p is carried here so one struct describes the whole setup, but it
/// acts on the oracle model, not on the generated data.
struct WorldParams {
    std::size_t clusters = 5;
    std::size_t per_cluster = 10;
    std::size_t embed_dim = 8;
    double cluster_separation = 10.0;
    double noise_p = 0.0;
    std::uint64_t seed = 0;
};

struct ClusterWorld {
    Datastore datastore;
    std::vector<TestInstance> testset;
    WorldParams params;
};

namespace detail {

// Three distinct words from the cluster's private vocabulary.
inline std::string cluster_payload(std::mt19937_64& rng, std::size_t cluster) {
    constexpr std::size_t vocab = 20;
    std::size_t slots[vocab];
    for (std::size_t i = 0; i < vocab; ++i)
        slots[i] = i;
    std::string payload;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, vocab - i));
        std::swap(slots[i], slots[j]);
        if (i > 0)
            payload += ' ';
        payload += 'c' + std::to_string(cluster) + 'w' + std::to_string(slots[i]);
    }
    return payload;
}

inline std::vector<double> jittered_center(std::mt19937_64& rng, std::size_t cluster,
                                           const WorldParams& p) {
    // Centers sit at (separation / sqrt(2)) * e_c, so every pair of centers
    // is exactly `cluster_separation` apart.
    std::vector<double> v(p.embed_dim);
    const double scale = p.cluster_separation / std::sqrt(2.0);
    for (std::size_t d = 0; d < p.embed_dim; ++d)
        v[d] = (d == cluster ? scale : 0.0) + gaussian(rng);
    return v;
}

inline std::string padded(std::size_t value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width)
        s.insert(s.begin(), '0');
    return s;
}

} // namespace detail

/// Generates clusters positions at mutually equidistant centers with unit
/// Gaussian jitter, inputs and labels in the cluster-oracle grammar, and one
/// held-out test instance per cluster (with references). Fully determined by
/// the seed.
inline ClusterWorld generate_cluster_world(const WorldParams& p) {
    if (p.clusters == 0 || p.per_cluster == 0)
        throw validation_error("cluster world needs at least one cluster and one example");
    if (p.embed_dim < p.clusters)
        throw validation_error("embed_dim must be >= clusters for equidistant centers (" +
                               std::to_string(p.embed_dim) + " < " +
                               std::to_string(p.clusters) + ")");
    ClusterWorld world;
    world.params = p;
    world.datastore.name = "cluster_world_c" + std::to_string(p.clusters) + "_s" +
                           std::to_string(p.seed);
    world.datastore.embedding_dim = p.embed_dim;
    std::mt19937_64 rng(p.seed);
    std::size_t next_id = 0;
    for (std::size_t c = 0; c < p.clusters; ++c) {
        for (std::size_t i = 0; i < p.per_cluster; ++i) {
            const std::string payload = detail::cluster_payload(rng, c);
            Example ex;
            ex.id = "e" + detail::padded(next_id++, 6);
            ex.input = "q:" + std::to_string(c) + ":" + payload;
            ex.label = "a:" + std::to_string(c) + ":" + payload;
            ex.embedding = detail::jittered_center(rng, c, p);
            ex.meta["cluster"] = std::to_string(c);
            world.datastore.examples.push_back(std::move(ex));
        }
    }
    for (std::size_t c = 0; c < p.clusters; ++c) {
        const std::string payload = detail::cluster_payload(rng, c);
        TestInstance t;
        t.id = "t" + detail::padded(c, 3);
        t.input = "q:" + std::to_string(c) + ":" + payload;
        t.reference = "a:" + std::to_string(c) + ":" + payload;
        t.embedding = detail::jittered_center(rng, c, p);
        world.testset.push_back(std::move(t));
    }
    return world;
}

/// ModelSpec for the oracle that answers this world's prompts.
inline ModelSpec world_oracle_spec(const ClusterWorld& world, std::string id) {
    ModelSpec spec;
    spec.id = std::move(id);
    spec.kind = ModelKind::cluster_oracle;
    spec.noise_p = world.params.noise_p;
    spec.seed = world.params.seed;
    return spec;
}

/// Cluster of a grammar string ("q:<c>:..." / "a:<c>:..."), or "" if the
/// string is not in the grammar.
inline std::string grammar_cluster(const std::string& text) {
    if (text.size() < 3 || (text[0] != 'q' && text[0] != 'a') || text[1] != ':')
        return "";
    const std::size_t end = text.find(':', 2);
    if (end == std::string::npos)
        return "";
    return text.substr(2, end - 2);
}

} // namespace bycs
