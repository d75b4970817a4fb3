#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "imgraph/features.hpp"

namespace imgraph {

inline constexpr std::size_t kDegree = 4;

/// Serialized as id + 4 neighbor ids + semantic + visual bytes.
inline constexpr std::size_t kNodeRecordBytes =
    sizeof(ImageId) + kDegree * sizeof(ImageId) + kSemanticDims + kVisualDims;
static_assert(kNodeRecordBytes == 134);

struct GraphNode {
    ImageId image_id = kNullId;
    /// Ascending; kNullId padding sorts last and only occurs in layers of < 5 nodes.
    std::array<ImageId, kDegree> neighbors{kNullId, kNullId, kNullId, kNullId};
    SemanticFeature semantic{};
    VisualFeature visual{};

    std::size_t degree() const noexcept;
    bool is_adjacent(ImageId other) const noexcept;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct Edge {
    ImageId lo;
    ImageId hi;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// One quartic similarity graph. Nodes live in a dense vector (storage order is
/// unspecified and changes on removal); lookups go through an id index.
class GraphLayer {
public:
    explicit GraphLayer(std::size_t level = 0) : level_(level) {}

    std::size_t level() const noexcept { return level_; }
    void set_level(std::size_t level) noexcept { level_ = level; }

    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }
    bool contains(ImageId id) const { return slots_.contains(id); }

    const GraphNode* find(ImageId id) const;
    /// Throws NotFound.
    const GraphNode& node(ImageId id) const;
    std::span<const GraphNode> nodes() const noexcept { return nodes_; }

    std::vector<ImageId> sorted_ids() const;
    /// Undirected edges, each once, sorted.
    std::vector<Edge> edges() const;
    std::size_t edge_count() const noexcept;
    bool has_edge(ImageId a, ImageId b) const;

    // Low-level mutation. Callers are responsible for restoring the layer
    // invariants; check_invariants() reports what is broken.
    void insert_isolated(ImageId id, const SemanticFeature& semantic, const VisualFeature& visual);
    /// Inserts a node verbatim, neighbors included (used by the loader).
    void insert_raw(const GraphNode& node);
    void connect(ImageId a, ImageId b);
    void disconnect(ImageId a, ImageId b);
    /// Removes a node with no remaining edges.
    void erase_isolated(ImageId id);

    /// Empty when every layer invariant holds, else a description of the first violation.
    std::optional<std::string> check_invariants() const;

    /// Structural equality: same level, same node set with identical neighbors and features.
    friend bool operator==(const GraphLayer& a, const GraphLayer& b);

    // Slot-level access for the algorithms in graph.cpp.
    std::uint32_t slot_of(ImageId id) const;
    const GraphNode& at_slot(std::uint32_t slot) const { return nodes_[slot]; }

private:
    GraphNode& mutable_node(ImageId id);

    std::size_t level_;
    std::vector<GraphNode> nodes_;
    std::unordered_map<ImageId, std::uint32_t> slots_;
};

struct QualityReport {
    std::size_t edge_count = 0;
    double quality = 0.0;
};

/// Random quartic graph via the configuration model (4 half-edges per node,
/// random perfect matching) with swap repair of self-loops and multi-edges.
/// Layers of fewer than 6 nodes are complete graphs. Throws DuplicateId.
GraphLayer build_random_graph(std::span<const FeatureRecord> records, std::uint64_t seed);
GraphLayer build_random_graph(std::span<const GraphNode> nodes, std::uint64_t seed);

/// Mean semantic similarity over all undirected edges. Throws NoEdges.
QualityReport graph_quality(const GraphLayer& layer);

/// Sum over edges of the squared semantic byte distance; quality is an affine
/// function of it, so comparisons on this value are exact.
std::uint64_t total_edge_distance(const GraphLayer& layer);

/// Runs exactly `attempts` 2-edge-swap attempts, accepting only strictly
/// improving legal rewirings. Returns the number of accepted swaps.
std::size_t improve_in_place(GraphLayer& layer, std::size_t attempts, std::mt19937_64& rng);
GraphLayer improve(GraphLayer layer, std::size_t attempts, std::uint64_t seed);

/// Splices a new node into two edges chosen for maximal affinity to it.
void add_node_in_place(GraphLayer& layer, const FeatureRecord& record);
GraphLayer add_node(GraphLayer layer, const FeatureRecord& record);

/// Deletes a node and re-pairs its ex-neighbors. Throws NotFound.
void remove_node_in_place(GraphLayer& layer, ImageId id, std::mt19937_64& rng);
GraphLayer remove_node(GraphLayer layer, ImageId id, std::uint64_t seed = 0);

struct HierarchicalGraph {
    std::vector<GraphLayer> layers;  // layers[0] holds every image

    std::size_t layer_count() const noexcept { return layers.size(); }
    const GraphLayer& base() const { return layers.front(); }
    const GraphLayer& top() const { return layers.back(); }
    std::optional<std::string> check_invariants() const;

    friend bool operator==(const HierarchicalGraph&, const HierarchicalGraph&) = default;
};

inline constexpr std::size_t kTopLayerMaxNodes = 64;
inline constexpr std::size_t kHierarchyImproveFactor = 20;

/// Stacks maximal-independent-set summaries until a layer has <= 64 nodes.
HierarchicalGraph build_hierarchy(const GraphLayer& base, std::uint64_t seed);

/// Lazily enumerates a layer breadth-first from a center. Each frontier is
/// emitted in descending semantic similarity to the center, ties by ascending
/// id. When the center's component is exhausted, traversal continues from the
/// unvisited node most similar to the center, so every node is eventually yielded.
class NeighborhoodWalker {
public:
    /// Throws NotFound.
    NeighborhoodWalker(const GraphLayer& layer, ImageId center);

    std::optional<ImageId> next();

private:
    void advance_frontier();

    const GraphLayer* layer_;
    SemanticFeature center_semantic_;
    std::unordered_set<ImageId> visited_;
    std::vector<ImageId> frontier_;
    std::size_t cursor_ = 0;
};

/// First min(count, layer size) ids of the walk, center first. Throws NotFound.
std::vector<ImageId> expand_neighborhood(const GraphLayer& layer, ImageId center, std::size_t count);

}  // namespace imgraph
