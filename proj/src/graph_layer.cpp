#include <algorithm>
#include <sstream>

#include "imgraph/error.hpp"
#include "imgraph/graph.hpp"

namespace imgraph {

std::size_t GraphNode::degree() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(neighbors.begin(), neighbors.end(), [](ImageId n) { return n != kNullId; }));
}

bool GraphNode::is_adjacent(ImageId other) const noexcept {
    return other != kNullId && std::find(neighbors.begin(), neighbors.end(), other) != neighbors.end();
}

const GraphNode* GraphLayer::find(ImageId id) const {
    auto it = slots_.find(id);
    return it == slots_.end() ? nullptr : &nodes_[it->second];
}

const GraphNode& GraphLayer::node(ImageId id) const {
    const GraphNode* found = find(id);
    if (found == nullptr) {
        throw Error(ErrorCode::NotFound, "image " + std::to_string(id) + " not in layer " +
                                             std::to_string(level_));
    }
    return *found;
}

GraphNode& GraphLayer::mutable_node(ImageId id) {
    return nodes_[slot_of(id)];
}

std::uint32_t GraphLayer::slot_of(ImageId id) const {
    auto it = slots_.find(id);
    if (it == slots_.end()) {
        throw Error(ErrorCode::NotFound, "image " + std::to_string(id) + " not in layer " +
                                             std::to_string(level_));
    }
    return it->second;
}

std::vector<ImageId> GraphLayer::sorted_ids() const {
    std::vector<ImageId> ids;
    ids.reserve(nodes_.size());
    for (const auto& n : nodes_) ids.push_back(n.image_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<Edge> GraphLayer::edges() const {
    std::vector<Edge> out;
    out.reserve(nodes_.size() * kDegree / 2);
    for (const auto& n : nodes_) {
        for (ImageId m : n.neighbors) {
            if (m != kNullId && n.image_id < m) out.push_back({n.image_id, m});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t GraphLayer::edge_count() const noexcept {
    std::size_t half_edges = 0;
    for (const auto& n : nodes_) half_edges += n.degree();
    return half_edges / 2;
}

bool GraphLayer::has_edge(ImageId a, ImageId b) const {
    const GraphNode* na = find(a);
    return na != nullptr && na->is_adjacent(b);
}

void GraphLayer::insert_isolated(ImageId id, const SemanticFeature& semantic, const VisualFeature& visual) {
    GraphNode node;
    node.image_id = id;
    node.semantic = semantic;
    node.visual = visual;
    insert_raw(node);
}

void GraphLayer::insert_raw(const GraphNode& node) {
    if (node.image_id == kNullId) {
        throw Error(ErrorCode::OutOfRange, "image id 0xFFFFFFFF is reserved");
    }
    auto [it, inserted] = slots_.emplace(node.image_id, static_cast<std::uint32_t>(nodes_.size()));
    if (!inserted) {
        throw Error(ErrorCode::DuplicateId, "image " + std::to_string(node.image_id) + " already present");
    }
    nodes_.push_back(node);
}

namespace {

void put_neighbor(GraphNode& node, ImageId other) {
    auto slot = std::find(node.neighbors.begin(), node.neighbors.end(), kNullId);
    if (slot == node.neighbors.end()) {
        throw Error(ErrorCode::CorruptGraph, "node " + std::to_string(node.image_id) + " already has degree 4");
    }
    *slot = other;
    std::sort(node.neighbors.begin(), node.neighbors.end());
}

void drop_neighbor(GraphNode& node, ImageId other) {
    auto slot = std::find(node.neighbors.begin(), node.neighbors.end(), other);
    if (slot == node.neighbors.end()) {
        throw Error(ErrorCode::CorruptGraph, "no edge " + std::to_string(node.image_id) + "-" +
                                                 std::to_string(other));
    }
    *slot = kNullId;
    std::sort(node.neighbors.begin(), node.neighbors.end());
}

}  // namespace

void GraphLayer::connect(ImageId a, ImageId b) {
    if (a == b) throw Error(ErrorCode::CorruptGraph, "self-loop on " + std::to_string(a));
    GraphNode& na = mutable_node(a);
    GraphNode& nb = mutable_node(b);
    if (na.is_adjacent(b)) {
        throw Error(ErrorCode::CorruptGraph, "edge " + std::to_string(a) + "-" + std::to_string(b) + " exists");
    }
    put_neighbor(na, b);
    put_neighbor(nb, a);
}

void GraphLayer::disconnect(ImageId a, ImageId b) {
    drop_neighbor(mutable_node(a), b);
    drop_neighbor(mutable_node(b), a);
}

void GraphLayer::erase_isolated(ImageId id) {
    const std::uint32_t slot = slot_of(id);
    if (nodes_[slot].degree() != 0) {
        throw Error(ErrorCode::CorruptGraph, "erasing node " + std::to_string(id) + " with live edges");
    }
    const std::uint32_t last = static_cast<std::uint32_t>(nodes_.size() - 1);
    if (slot != last) {
        nodes_[slot] = nodes_[last];
        slots_[nodes_[slot].image_id] = slot;
    }
    nodes_.pop_back();
    slots_.erase(id);
}

std::optional<std::string> GraphLayer::check_invariants() const {
    const std::size_t n = nodes_.size();
    const std::size_t want = n >= kDegree + 1 ? kDegree : (n == 0 ? 0 : n - 1);
    for (const auto& node : nodes_) {
        std::ostringstream where;
        where << "layer " << level_ << " node " << node.image_id << ": ";
        if (node.degree() != want) {
            where << "degree " << node.degree() << ", expected " << want;
            return where.str();
        }
        for (std::size_t i = 0; i < kDegree; ++i) {
            const ImageId m = node.neighbors[i];
            if (m == kNullId) continue;
            if (m == node.image_id) return where.str() + "self-loop";
            if (i > 0 && node.neighbors[i - 1] >= m) return where.str() + "neighbors not strictly ascending";
            const GraphNode* other = find(m);
            if (other == nullptr) return where.str() + "dangling neighbor " + std::to_string(m);
            if (!other->is_adjacent(node.image_id)) {
                return where.str() + "asymmetric edge to " + std::to_string(m);
            }
        }
    }
    return std::nullopt;
}

bool operator==(const GraphLayer& a, const GraphLayer& b) {
    if (a.level_ != b.level_ || a.size() != b.size()) return false;
    for (const auto& node : a.nodes_) {
        const GraphNode* other = b.find(node.image_id);
        if (other == nullptr || !(*other == node)) return false;
    }
    return true;
}

std::optional<std::string> HierarchicalGraph::check_invariants() const {
    if (layers.empty()) return "hierarchy has no layers";
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const GraphLayer& layer = layers[k];
        if (layer.level() != k) {
            return "layer at position " + std::to_string(k) + " has level " + std::to_string(layer.level());
        }
        if (auto broken = layer.check_invariants()) return broken;
        if (k == 0) continue;
        const GraphLayer& below = layers[k - 1];
        if (layer.size() >= below.size()) {
            return "layer " + std::to_string(k) + " does not shrink";
        }
        for (const auto& node : layer.nodes()) {
            const GraphNode* lower = below.find(node.image_id);
            if (lower == nullptr) {
                return "layer " + std::to_string(k) + " node " + std::to_string(node.image_id) +
                       " missing from layer " + std::to_string(k - 1);
            }
            if (lower->semantic != node.semantic || lower->visual != node.visual) {
                return "layer " + std::to_string(k) + " node " + std::to_string(node.image_id) +
                       " features differ from layer below";
            }
        }
    }
    if (layers.back().size() > kTopLayerMaxNodes) return "top layer exceeds 64 nodes";
    return std::nullopt;
}

}  // namespace imgraph
