#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the algorithms under test beyond the data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "imgraph/features.hpp"
#include "imgraph/graph.hpp"

namespace imgraph::fixtures {

inline FeatureRecord uniform_record(ImageId id, std::uint8_t semantic_value, std::uint8_t visual_value = 0) {
    FeatureRecord r;
    r.image_id = id;
    r.semantic.fill(semantic_value);
    r.visual.fill(visual_value);
    return r;
}

/// 8 records, ids 1..4 near one random center and 5..8 near another.
inline std::vector<FeatureRecord> two_cluster_fixture(std::uint64_t seed, double sigma = 0.05) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<FeatureRecord> out;
    for (int cluster = 0; cluster < 2; ++cluster) {
        std::array<double, kSemanticDims> center{};
        std::array<double, kVisualDims> vcenter{};
        for (auto& x : center) x = unit(rng);
        for (auto& x : vcenter) x = unit(rng);
        for (int i = 0; i < 4; ++i) {
            FeatureRecord r;
            r.image_id = static_cast<ImageId>(cluster * 4 + i + 1);
            for (std::size_t d = 0; d < kSemanticDims; ++d) {
                r.semantic[d] = static_cast<std::uint8_t>(std::lround(std::clamp(center[d] + noise(rng), 0.0, 1.0) * 255));
            }
            for (std::size_t d = 0; d < kVisualDims; ++d) {
                r.visual[d] = static_cast<std::uint8_t>(std::lround(std::clamp(vcenter[d] + noise(rng), 0.0, 1.0) * 255));
            }
            out.push_back(r);
        }
    }
    return out;
}

/// Similarity computed straight from the definition, in doubles.
inline double reference_similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] / 255.0 - b[i] / 255.0;
        s += d * d;
    }
    return 1.0 - s / static_cast<double>(a.size());
}

/// Brute-force quality: average reference similarity over the edge list.
inline double reference_quality(const GraphLayer& layer) {
    double sum = 0.0;
    std::size_t edges = 0;
    for (const auto& node : layer.nodes()) {
        for (ImageId m : node.neighbors) {
            if (m == kNullId || m < node.image_id) continue;
            sum += reference_similarity(node.semantic, layer.node(m).semantic);
            ++edges;
        }
    }
    return sum / static_cast<double>(edges);
}

struct EnumerationResult {
    std::size_t graph_count = 0;
    double best_quality = 0.0;
};

/// Enumerates every 4-regular simple graph on the given 8 labeled vertices by
/// backtracking over the 28 vertex pairs, tracking the best mean edge similarity.
inline EnumerationResult enumerate_quartic_optimum(const std::vector<FeatureRecord>& records) {
    constexpr int n = 8;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }
    std::vector<double> weight(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        weight[k] = reference_similarity(records[pairs[k].first].semantic, records[pairs[k].second].semantic);
    }

    EnumerationResult result;
    std::array<int, n> degree{};
    double best_sum = -1.0;
    auto recurse = [&](auto&& self, std::size_t k, double sum) -> void {
        if (k == pairs.size()) {
            for (int d : degree) {
                if (d != 4) return;
            }
            ++result.graph_count;
            best_sum = std::max(best_sum, sum);
            return;
        }
        const auto [i, j] = pairs[k];
        // Pair (i, n-1) is the last one touching i, so i must be saturated after it.
        auto next = [&](double s) {
            if (j == n - 1 && degree[i] != 4) return;
            self(self, k + 1, s);
        };
        if (degree[i] < 4 && degree[j] < 4) {
            ++degree[i];
            ++degree[j];
            next(sum + weight[k]);
            --degree[i];
            --degree[j];
        }
        next(sum);
    };
    recurse(recurse, 0, 0.0);
    result.best_quality = best_sum / 16.0;
    return result;
}

/// Independent ordering oracle for expand_neighborhood on connected layers:
/// full BFS distances first, then sort by (distance, similarity desc, id).
inline std::vector<ImageId> bfs_order_oracle(const GraphLayer& layer, ImageId center) {
    std::map<ImageId, int> dist;
    std::queue<ImageId> q;
    dist[center] = 0;
    q.push(center);
    while (!q.empty()) {
        const ImageId u = q.front();
        q.pop();
        for (ImageId v : layer.node(u).neighbors) {
            if (v != kNullId && !dist.contains(v)) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    const auto& c = layer.node(center).semantic;
    std::vector<std::tuple<int, double, ImageId>> keyed;
    for (auto [id, d] : dist) keyed.emplace_back(d, -reference_similarity(c, layer.node(id).semantic), id);
    std::sort(keyed.begin(), keyed.end());
    std::vector<ImageId> out;
    for (auto& [d, s, id] : keyed) out.push_back(id);
    return out;
}

/// Number of connected components, by BFS.
inline std::size_t component_count(const GraphLayer& layer) {
    std::set<ImageId> seen;
    std::size_t components = 0;
    for (const auto& node : layer.nodes()) {
        if (seen.contains(node.image_id)) continue;
        ++components;
        std::queue<ImageId> q;
        q.push(node.image_id);
        seen.insert(node.image_id);
        while (!q.empty()) {
            const ImageId u = q.front();
            q.pop();
            for (ImageId v : layer.node(u).neighbors) {
                if (v != kNullId && seen.insert(v).second) q.push(v);
            }
        }
    }
    return components;
}

// Independent grid score from the definition, on a row-major id layout.
inline double reference_grid_quality(const std::vector<const FeatureRecord*>& layout, std::size_t rows, std::size_t cols) {
    double sum = 0.0;
    int pairs = 0;
    auto score = [&](const FeatureRecord* a, const FeatureRecord* b) {
        if (!a || !b) return;
        const double ds = 1.0 - fixtures::reference_similarity(a->semantic, b->semantic);
        const double dv = 1.0 - fixtures::reference_similarity(a->visual, b->visual);
        sum += 1.0 - (0.7 * ds + 0.3 * dv);
        ++pairs;
    };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c + 1 < cols) score(layout[r * cols + c], layout[r * cols + c + 1]);
            if (r + 1 < rows) score(layout[r * cols + c], layout[(r + 1) * cols + c]);
        }
    }
    return sum / pairs;
}

inline double best_of_all_placements(const std::vector<FeatureRecord>& items) {
    std::vector<std::size_t> perm(items.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1.0;
    do {
        std::vector<const FeatureRecord*> layout;
        for (std::size_t p : perm) layout.push_back(&items[p]);
        best = std::max(best, reference_grid_quality(layout, 2, 2));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace imgraph::fixtures
