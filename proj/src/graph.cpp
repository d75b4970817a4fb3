#include <algorithm>
#include <array>
#include <numeric>
#include <queue>
#include <tuple>
#include <unordered_map>

#include "imgraph/error.hpp"
#include "imgraph/graph.hpp"

namespace imgraph {

namespace {

std::uint64_t semantic_distance(const GraphNode& a, const GraphNode& b) {
    return squared_byte_distance(a.semantic, b.semantic);
}

std::uint64_t semantic_distance(const SemanticFeature& a, const GraphNode& b) {
    return squared_byte_distance(a, b.semantic);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

GraphNode isolated(const FeatureRecord& r) {
    GraphNode node;
    node.image_id = r.image_id;
    node.semantic = r.semantic;
    node.visual = r.visual;
    return node;
}

GraphNode isolated(const GraphNode& n) {
    GraphNode node = n;
    node.neighbors.fill(kNullId);
    return node;
}

GraphLayer complete_graph(std::span<const GraphNode> nodes) {
    GraphLayer layer;
    for (const auto& n : nodes) layer.insert_raw(isolated(n));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            layer.connect(nodes[i].image_id, nodes[j].image_id);
        }
    }
    return layer;
}

// Multigraph under construction: 4 half-edge endpoints per vertex (a self-loop
// contributes two entries to its own vertex).
struct Multigraph {
    std::vector<std::array<std::uint32_t, kDegree>> adj;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

    std::size_t multiplicity(std::uint32_t u, std::uint32_t v) const {
        return static_cast<std::size_t>(std::count(adj[u].begin(), adj[u].end(), v));
    }
    bool bad(std::size_t e) const {
        auto [u, v] = edges[e];
        return u == v || multiplicity(u, v) > 1;
    }
    static void replace(std::array<std::uint32_t, kDegree>& row, std::uint32_t from, std::uint32_t to) {
        *std::find(row.begin(), row.end(), from) = to;
    }
};

Multigraph random_pairing(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::uint32_t> stubs(n * kDegree);
    for (std::size_t i = 0; i < stubs.size(); ++i) stubs[i] = static_cast<std::uint32_t>(i / kDegree);
    std::shuffle(stubs.begin(), stubs.end(), rng);

    Multigraph g;
    g.adj.resize(n);
    std::vector<std::uint8_t> fill(n, 0);
    g.edges.reserve(stubs.size() / 2);
    for (std::size_t i = 0; i < stubs.size(); i += 2) {
        const std::uint32_t u = stubs[i];
        const std::uint32_t v = stubs[i + 1];
        g.edges.emplace_back(u, v);
        g.adj[u][fill[u]++] = v;
        g.adj[v][fill[v]++] = u;
    }
    return g;
}

// Removes self-loops and multi-edges by swapping each bad edge (u,v) with a
// random edge (x,y) into (u,x),(v,y). Every accepted swap strictly reduces the
// number of bad edges. Returns false if some bad edge found no partner.
bool repair_pairing(Multigraph& g, std::mt19937_64& rng) {
    std::vector<std::size_t> pending;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (g.bad(e)) pending.push_back(e);
    }
    const std::size_t tries_per_edge = 1000 + 4 * g.edges.size();
    while (!pending.empty()) {
        const std::size_t e = pending.back();
        if (!g.bad(e)) {
            pending.pop_back();
            continue;
        }
        bool fixed = false;
        for (std::size_t t = 0; t < tries_per_edge && !fixed; ++t) {
            const std::size_t f = uniform_index(rng, g.edges.size());
            if (f == e) continue;
            auto [u, v] = g.edges[e];
            auto [x, y] = g.edges[f];
            if (rng() & 1u) std::swap(x, y);
            if (x == y || x == u || x == v || y == u || y == v) continue;
            if (g.multiplicity(u, x) > 0 || g.multiplicity(v, y) > 0) continue;
            Multigraph::replace(g.adj[u], v, x);
            Multigraph::replace(g.adj[v], u, y);
            Multigraph::replace(g.adj[x], y, u);
            Multigraph::replace(g.adj[y], x, v);
            g.edges[e] = {u, x};
            g.edges[f] = {v, y};
            fixed = true;
        }
        if (!fixed) return false;
        pending.pop_back();
    }
    return true;
}

struct Candidate {
    ImageId a, b, c, d;
};

// Evaluates the two rewirings of edges (a,b),(c,d) and applies the best
// strictly improving legal one.
bool try_swap(GraphLayer& layer, ImageId a, ImageId b, ImageId c, ImageId d) {
    if (a == c || a == d || b == c || b == d) return false;
    const GraphNode& na = layer.node(a);
    const GraphNode& nb = layer.node(b);
    const GraphNode& nc = layer.node(c);
    const GraphNode& nd = layer.node(d);

    const std::uint64_t current = semantic_distance(na, nb) + semantic_distance(nc, nd);
    std::uint64_t best = current;
    int choice = 0;
    if (!na.is_adjacent(c) && !nb.is_adjacent(d)) {
        const std::uint64_t cost = semantic_distance(na, nc) + semantic_distance(nb, nd);
        if (cost < best) {
            best = cost;
            choice = 1;
        }
    }
    if (!na.is_adjacent(d) && !nb.is_adjacent(c)) {
        const std::uint64_t cost = semantic_distance(na, nd) + semantic_distance(nb, nc);
        if (cost < best) {
            best = cost;
            choice = 2;
        }
    }
    if (choice == 0) return false;

    layer.disconnect(a, b);
    layer.disconnect(c, d);
    if (choice == 1) {
        layer.connect(a, c);
        layer.connect(b, d);
    } else {
        layer.connect(a, d);
        layer.connect(b, c);
    }
    return true;
}

// Uniform over half-edges when every node has the same degree.
std::optional<Edge> random_edge_from(const GraphNode& node, std::mt19937_64& rng) {
    const std::size_t deg = node.degree();
    if (deg == 0) return std::nullopt;
    return Edge{node.image_id, node.neighbors[uniform_index(rng, deg)]};
}

std::optional<Edge> random_edge(const GraphLayer& layer, std::mt19937_64& rng) {
    if (layer.empty()) return std::nullopt;
    const auto slot = static_cast<std::uint32_t>(uniform_index(rng, layer.size()));
    return random_edge_from(layer.at_slot(slot), rng);
}

template <typename PickFirst>
std::size_t improve_with(GraphLayer& layer, std::size_t attempts, std::mt19937_64& rng, PickFirst pick_first) {
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < attempts; ++i) {
        const auto first = pick_first();
        const auto second = random_edge(layer, rng);
        if (!first || !second) continue;
        if (try_swap(layer, first->lo, first->hi, second->lo, second->hi)) ++accepted;
    }
    return accepted;
}

}  // namespace

GraphLayer build_random_graph(std::span<const FeatureRecord> records, std::uint64_t seed) {
    std::vector<GraphNode> nodes;
    nodes.reserve(records.size());
    for (const auto& r : records) nodes.push_back(isolated(r));
    return build_random_graph(nodes, seed);
}

GraphLayer build_random_graph(std::span<const GraphNode> nodes, std::uint64_t seed) {
    {
        std::unordered_set<ImageId> seen;
        seen.reserve(nodes.size());
        for (const auto& n : nodes) {
            if (!seen.insert(n.image_id).second) {
                throw Error(ErrorCode::DuplicateId, "image " + std::to_string(n.image_id) + " appears twice");
            }
        }
    }
    // K5 is the only 4-regular graph on 5 vertices; below that, complete graphs.
    if (nodes.size() <= kDegree + 1) return complete_graph(nodes);

    std::mt19937_64 rng(seed);
    constexpr int kMaxRestarts = 1000;
    for (int restart = 0; restart < kMaxRestarts; ++restart) {
        Multigraph g = random_pairing(nodes.size(), rng);
        if (!repair_pairing(g, rng)) continue;

        GraphLayer layer;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            GraphNode node = isolated(nodes[i]);
            for (std::size_t k = 0; k < kDegree; ++k) node.neighbors[k] = nodes[g.adj[i][k]].image_id;
            std::sort(node.neighbors.begin(), node.neighbors.end());
            layer.insert_raw(node);
        }
        return layer;
    }
    throw Error(ErrorCode::CorruptGraph, "could not construct a simple quartic graph");
}

std::uint64_t total_edge_distance(const GraphLayer& layer) {
    std::uint64_t total = 0;
    for (const auto& n : layer.nodes()) {
        for (ImageId m : n.neighbors) {
            if (m != kNullId && n.image_id < m) total += semantic_distance(n, layer.node(m));
        }
    }
    return total;
}

QualityReport graph_quality(const GraphLayer& layer) {
    const std::size_t edges = layer.edge_count();
    if (edges == 0) throw Error(ErrorCode::NoEdges, "quality is undefined on a layer without edges");
    const double scale = 255.0 * 255.0 * static_cast<double>(kSemanticDims) * static_cast<double>(edges);
    return {edges, 1.0 - static_cast<double>(total_edge_distance(layer)) / scale};
}

std::size_t improve_in_place(GraphLayer& layer, std::size_t attempts, std::mt19937_64& rng) {
    return improve_with(layer, attempts, rng, [&] { return random_edge(layer, rng); });
}

GraphLayer improve(GraphLayer layer, std::size_t attempts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    improve_in_place(layer, attempts, rng);
    return layer;
}

void add_node_in_place(GraphLayer& layer, const FeatureRecord& record) {
    if (layer.contains(record.image_id)) {
        throw Error(ErrorCode::DuplicateId, "image " + std::to_string(record.image_id) + " already present");
    }
    if (layer.size() + 1 <= kDegree + 1) {
        const std::vector<ImageId> existing = layer.sorted_ids();
        layer.insert_isolated(record.image_id, record.semantic, record.visual);
        for (ImageId other : existing) layer.connect(record.image_id, other);
        return;
    }

    // Maximizing the similarity sum is minimizing the squared-distance sum.
    std::unordered_map<ImageId, std::uint64_t> affinity;
    affinity.reserve(layer.size());
    for (const auto& n : layer.nodes()) affinity.emplace(n.image_id, semantic_distance(record.semantic, n));

    const std::vector<Edge> all_edges = layer.edges();
    std::array<Edge, 2> chosen{};
    for (std::size_t round = 0; round < 2; ++round) {
        std::optional<Edge> best;
        std::uint64_t best_cost = 0;
        for (const Edge& e : all_edges) {  // sorted, so the first minimum wins ties
            if (round == 1 && (e.lo == chosen[0].lo || e.lo == chosen[0].hi || e.hi == chosen[0].lo ||
                               e.hi == chosen[0].hi)) {
                continue;
            }
            const std::uint64_t cost = affinity[e.lo] + affinity[e.hi];
            if (!best || cost < best_cost) {
                best = e;
                best_cost = cost;
            }
        }
        if (!best) throw Error(ErrorCode::CorruptGraph, "no disjoint edge pair to splice into");
        chosen[round] = *best;
    }

    layer.insert_isolated(record.image_id, record.semantic, record.visual);
    for (const Edge& e : chosen) {
        layer.disconnect(e.lo, e.hi);
        layer.connect(record.image_id, e.lo);
        layer.connect(record.image_id, e.hi);
    }
}

GraphLayer add_node(GraphLayer layer, const FeatureRecord& record) {
    add_node_in_place(layer, record);
    return layer;
}

namespace {

inline constexpr std::size_t kLocalRepairAttempts = 100;

// Joins x-y without creating a multi-edge by rewiring one existing edge (p,q)
// into (x,p),(y,q). Degrees of p and q are unchanged.
void splice_through_random_edge(GraphLayer& layer, ImageId x, ImageId y, std::mt19937_64& rng,
                                std::vector<ImageId>& touched) {
    auto legal = [&](ImageId p, ImageId q) {
        return p != x && p != y && q != x && q != y && !layer.has_edge(x, p) && !layer.has_edge(y, q);
    };
    auto apply = [&](ImageId p, ImageId q) {
        layer.disconnect(p, q);
        layer.connect(x, p);
        layer.connect(y, q);
        touched.push_back(p);
        touched.push_back(q);
    };
    for (int t = 0; t < 1000; ++t) {
        auto e = random_edge(layer, rng);
        if (!e) break;
        ImageId p = e->lo, q = e->hi;
        if (rng() & 1u) std::swap(p, q);
        if (legal(p, q)) {
            apply(p, q);
            return;
        }
    }
    for (const Edge& e : layer.edges()) {
        if (legal(e.lo, e.hi)) return apply(e.lo, e.hi);
        if (legal(e.hi, e.lo)) return apply(e.hi, e.lo);
    }
    throw Error(ErrorCode::CorruptGraph, "no edge available to repair " + std::to_string(x) + "-" +
                                             std::to_string(y));
}

}  // namespace

void remove_node_in_place(GraphLayer& layer, ImageId id, std::mt19937_64& rng) {
    const GraphNode victim = layer.node(id);
    std::vector<ImageId> freed;
    for (ImageId m : victim.neighbors) {
        if (m != kNullId) freed.push_back(m);
    }
    for (ImageId m : freed) layer.disconnect(id, m);
    layer.erase_isolated(id);

    if (layer.size() <= kDegree + 1) {
        // Small layers are complete graphs; restore any missing edge.
        const std::vector<ImageId> ids = layer.sorted_ids();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                if (!layer.has_edge(ids[i], ids[j])) layer.connect(ids[i], ids[j]);
            }
        }
        return;
    }

    // The 3 perfect pairings of the 4 freed half-edges.
    const std::array<std::array<std::pair<std::size_t, std::size_t>, 2>, 3> pairings{{
        {{{0, 1}, {2, 3}}},
        {{{0, 2}, {1, 3}}},
        {{{0, 3}, {1, 2}}},
    }};
    auto pair_legal = [&](std::pair<std::size_t, std::size_t> p) {
        return !layer.has_edge(freed[p.first], freed[p.second]);
    };
    auto pair_cost = [&](std::pair<std::size_t, std::size_t> p) {
        return semantic_distance(layer.node(freed[p.first]), layer.node(freed[p.second]));
    };

    std::optional<std::size_t> best;
    std::uint64_t best_cost = 0;
    for (std::size_t k = 0; k < pairings.size(); ++k) {
        const auto& [p, q] = pairings[k];
        if (!pair_legal(p) || !pair_legal(q)) continue;
        const std::uint64_t cost = pair_cost(p) + pair_cost(q);
        if (!best || cost < best_cost) {
            best = k;
            best_cost = cost;
        }
    }
    if (best) {
        for (const auto& p : pairings[*best]) layer.connect(freed[p.first], freed[p.second]);
        return;
    }

    // No legal pairing: keep the pairing with the most legal pairs and repair
    // the rest through existing edges, then tidy up locally.
    std::size_t pick = 0;
    int pick_legal = -1;
    for (std::size_t k = 0; k < pairings.size(); ++k) {
        const int legal_pairs = static_cast<int>(pair_legal(pairings[k][0])) + static_cast<int>(pair_legal(pairings[k][1]));
        if (legal_pairs > pick_legal) {
            pick = k;
            pick_legal = legal_pairs;
        }
    }
    std::vector<ImageId> touched = freed;
    for (const auto& p : pairings[pick]) {
        const ImageId x = freed[p.first];
        const ImageId y = freed[p.second];
        if (!layer.has_edge(x, y)) {
            layer.connect(x, y);
        } else {
            splice_through_random_edge(layer, x, y, rng, touched);
        }
    }
    improve_with(layer, kLocalRepairAttempts, rng, [&]() -> std::optional<Edge> {
        return random_edge_from(layer.node(touched[uniform_index(rng, touched.size())]), rng);
    });
}

GraphLayer remove_node(GraphLayer layer, ImageId id, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    remove_node_in_place(layer, id, rng);
    return layer;
}

HierarchicalGraph build_hierarchy(const GraphLayer& base, std::uint64_t seed) {
    HierarchicalGraph hierarchy;
    hierarchy.layers.push_back(base);
    hierarchy.layers.back().set_level(0);

    std::mt19937_64 rng(seed);
    while (hierarchy.layers.back().size() > kTopLayerMaxNodes) {
        const GraphLayer& lower = hierarchy.layers.back();
        const std::vector<ImageId> ids = lower.sorted_ids();
        std::unordered_map<ImageId, std::size_t> index;
        index.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
        std::vector<std::array<std::size_t, kDegree>> adj(ids.size());
        std::vector<std::size_t> deg(ids.size(), 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (ImageId m : lower.node(ids[i]).neighbors) {
                if (m != kNullId) adj[i][deg[i]++] = index.at(m);
            }
        }
        std::vector<std::uint64_t> rank(ids.size());
        for (auto& r : rank) r = rng();

        // Maximal independent set, greedy by how many undominated nodes each pick covers.
        std::vector<bool> dominated(ids.size(), false);
        auto gain = [&](std::size_t i) {
            std::size_t g = 1;
            for (std::size_t k = 0; k < deg[i]; ++k) g += !dominated[adj[i][k]];
            return g;
        };
        using Entry = std::tuple<std::size_t, std::uint64_t, std::size_t>;
        std::priority_queue<Entry> queue;
        for (std::size_t i = 0; i < ids.size(); ++i) queue.emplace(deg[i] + 1, rank[i], i);
        std::vector<GraphNode> representatives;
        while (!queue.empty()) {
            const auto [g, r, i] = queue.top();
            queue.pop();
            if (dominated[i]) continue;
            if (const std::size_t now = gain(i); now != g) {
                queue.emplace(now, r, i);
                continue;
            }
            representatives.push_back(isolated(lower.node(ids[i])));
            dominated[i] = true;
            for (std::size_t k = 0; k < deg[i]; ++k) dominated[adj[i][k]] = true;
        }
        if (representatives.size() >= lower.size()) break;  // edgeless layer cannot shrink

        std::sort(representatives.begin(), representatives.end(),
                  [](const GraphNode& a, const GraphNode& b) { return a.image_id < b.image_id; });
        GraphLayer upper = build_random_graph(representatives, rng());
        improve_in_place(upper, kHierarchyImproveFactor * upper.size(), rng);
        upper.set_level(hierarchy.layers.size());
        hierarchy.layers.push_back(std::move(upper));
    }
    return hierarchy;
}

NeighborhoodWalker::NeighborhoodWalker(const GraphLayer& layer, ImageId center)
    : layer_(&layer), center_semantic_(layer.node(center).semantic) {
    visited_.insert(center);
    frontier_.push_back(center);
}

std::optional<ImageId> NeighborhoodWalker::next() {
    if (cursor_ == frontier_.size()) advance_frontier();
    if (cursor_ == frontier_.size()) return std::nullopt;
    return frontier_[cursor_++];
}

void NeighborhoodWalker::advance_frontier() {
    std::vector<ImageId> next;
    for (ImageId id : frontier_) {
        for (ImageId m : layer_->node(id).neighbors) {
            if (m != kNullId && visited_.insert(m).second) next.push_back(m);
        }
    }
    if (next.empty() && visited_.size() < layer_->size()) {
        // Component exhausted: jump to the closest unvisited node.
        std::optional<ImageId> jump;
        std::uint64_t jump_cost = 0;
        for (const auto& n : layer_->nodes()) {
            if (visited_.contains(n.image_id)) continue;
            const std::uint64_t cost = semantic_distance(center_semantic_, n);
            if (!jump || cost < jump_cost || (cost == jump_cost && n.image_id < *jump)) {
                jump = n.image_id;
                jump_cost = cost;
            }
        }
        visited_.insert(*jump);
        next.push_back(*jump);
    }
    std::vector<std::pair<std::uint64_t, ImageId>> keyed;
    keyed.reserve(next.size());
    for (ImageId id : next) keyed.emplace_back(semantic_distance(center_semantic_, layer_->node(id)), id);
    std::sort(keyed.begin(), keyed.end());
    frontier_.clear();
    for (const auto& [cost, id] : keyed) frontier_.push_back(id);
    cursor_ = 0;
}

std::vector<ImageId> expand_neighborhood(const GraphLayer& layer, ImageId center, std::size_t count) {
    NeighborhoodWalker walker(layer, center);
    std::vector<ImageId> out;
    out.reserve(std::min(count, layer.size()));
    while (out.size() < count) {
        auto id = walker.next();
        if (!id) break;
        out.push_back(*id);
    }
    return out;
}

}  // namespace imgraph
