#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "imgraph/features.hpp"
#include "imgraph/graph.hpp"
#include "imgraph/sorter.hpp"

namespace imgraph {

/// Global cell coordinate; x grows to the right, y downwards.
struct CellPos {
    std::int64_t x = 0;
    std::int64_t y = 0;
    // Row-major order: y first.
    friend std::strong_ordering operator<=>(const CellPos& a, const CellPos& b) {
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
    friend bool operator==(const CellPos&, const CellPos&) = default;
};

struct Viewport {
    std::int64_t cols = 12;
    std::int64_t rows = 8;
    std::int64_t origin_x = 0;
    std::int64_t origin_y = 0;
    std::size_t layer = 0;

    bool contains(CellPos p) const noexcept {
        return p.x >= origin_x && p.x < origin_x + cols && p.y >= origin_y && p.y < origin_y + rows;
    }
    CellPos central_cell() const noexcept { return {origin_x + cols / 2, origin_y + rows / 2}; }
};

/// Coordinate <-> image placements of one layer. An image occupies at most one cell.
class PositionCache {
public:
    void place(CellPos pos, ImageId id);
    std::optional<ImageId> at(CellPos pos) const;
    std::optional<CellPos> locate(ImageId id) const;
    bool contains(ImageId id) const { return by_id_.contains(id); }
    std::size_t size() const noexcept { return by_pos_.size(); }
    void erase(CellPos pos);
    void clear();
    const std::map<CellPos, ImageId>& cells() const noexcept { return by_pos_; }

private:
    std::map<CellPos, ImageId> by_pos_;
    std::unordered_map<ImageId, CellPos> by_id_;
};

struct SessionState {
    std::string session_id;
    Viewport viewport;
    std::map<std::size_t, PositionCache> caches;  // per layer
    bool has_map = false;
    ImageId center = kNullId;
};

struct MapCell {
    ImageId id;
    std::int64_t x;
    std::int64_t y;
    friend bool operator==(const MapCell&, const MapCell&) = default;
};

struct RelatedConcept {
    std::string label;
    ImageId id;
    friend bool operator==(const RelatedConcept&, const RelatedConcept&) = default;
};

struct Transition {
    ImageId id;
    std::int64_t from_x, from_y, to_x, to_y;
    friend bool operator==(const Transition&, const Transition&) = default;
};

struct MapResponse {
    std::size_t layer = 0;
    std::vector<MapCell> cells;  // row-major by coordinate
    std::vector<RelatedConcept> related;
    std::vector<Transition> transitions;  // ascending id
    friend bool operator==(const MapResponse&, const MapResponse&) = default;
};

struct KeywordRegion {
    std::string keyword;
    std::vector<ImageId> members;  // ascending
    ImageId representative = kNullId;
};

enum class ZoomDirection { In, Out };

struct NavigatorOptions {
    std::int64_t viewport_cols = 12;
    std::int64_t viewport_rows = 8;
    /// Layer a search lands on, clamped to the top layer.
    std::size_t search_layer = 1;
    std::size_t max_related = 8;
    std::size_t medoid_sample = 256;
    std::uint64_t seed = 0;
    SortOptions sort{};
};

/// Interactive map semantics over one immutable graph snapshot. Every
/// operation is a pure function of the session state, its arguments, the
/// snapshot, and the options.
class Navigator {
public:
    Navigator(std::shared_ptr<const HierarchicalGraph> graph, std::shared_ptr<const KeywordIndex> keywords,
              NavigatorOptions options = {});

    SessionState new_session(std::string session_id) const;

    /// Connected components of the keyword-induced subgraph of layer 0,
    /// largest first. Throws KeywordNotFound.
    std::vector<KeywordRegion> find_keyword_regions(std::string_view keyword) const;

    MapResponse search(SessionState& session, std::string_view keyword) const;
    MapResponse drag(SessionState& session, std::int64_t dx_cells, std::int64_t dy_cells) const;
    MapResponse zoom(SessionState& session, ZoomDirection direction, std::int64_t focus_x, std::int64_t focus_y) const;
    MapResponse recenter(SessionState& session, ImageId id) const;

    /// The visible cached cells of the session's current layer.
    MapResponse visible_map(const SessionState& session) const;

    const HierarchicalGraph& graph() const noexcept { return *graph_; }
    const NavigatorOptions& options() const noexcept { return options_; }

    /// id itself if present in the layer, else the layer's most semantically
    /// similar node (ties by ascending id).
    ImageId closest_in_layer(ImageId id, std::size_t layer) const;

private:
    const GraphNode& node_anywhere(ImageId id) const;
    MapResponse build_map(SessionState& session, std::size_t layer, ImageId center, CellPos anchor) const;
    std::vector<MapCell> visible_cells(const SessionState& session) const;
    /// Drops cached ids no longer present in their layer (graph snapshot changed).
    void prune_stale(SessionState& session) const;

    std::shared_ptr<const HierarchicalGraph> graph_;
    std::shared_ptr<const KeywordIndex> keywords_;
    NavigatorOptions options_;
};

std::vector<Transition> transitions_between(const std::vector<MapCell>& before, const std::vector<MapCell>& after);

}  // namespace imgraph
