#pragma once

#include <map>
#include <random>
#include <utility>

#include "geoq/embedding.hpp"
#include "geoq/mesh.hpp"
#include "geoq/sphere.hpp"

namespace geoq::testing {

inline UnitVec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        const Vec3 v{n(rng), n(rng), n(rng)};
        if (norm(v) > 1e-6) {
            return UnitVec3(v);
        }
    }
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Converged embedding of n uniform points in the unit square, cached per (n, seed).
inline const SphericalEmbedding& square_embedding_cached(int n, std::uint64_t seed) {
    static std::map<std::pair<int, std::uint64_t>, SphericalEmbedding> cache;
    auto it = cache.find({n, seed});
    if (it == cache.end()) {
        std::mt19937_64 rng(seed);
        std::vector<Point2> pts;
        for (int i = 0; i < n; ++i) {
            pts.push_back({uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)});
        }
        const std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        auto emb = harmonic_sphere_map(double_cover(refine_boundary_chords(triangulate(pts, square))));
        require_converged(emb);
        it = cache.emplace(std::make_pair(n, seed), std::move(emb)).first;
    }
    return it->second;
}

}  // namespace geoq::testing
