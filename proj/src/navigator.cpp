#include "imgraph/navigator.hpp"

#include <algorithm>
#include <queue>
#include <random>
#include <unordered_set>

#include "imgraph/error.hpp"

namespace imgraph {

void PositionCache::place(CellPos pos, ImageId id) {
    if (by_pos_.contains(pos) || by_id_.contains(id)) {
        throw Error(ErrorCode::CorruptGraph, "position cache collision for image " + std::to_string(id));
    }
    by_pos_.emplace(pos, id);
    by_id_.emplace(id, pos);
}

std::optional<ImageId> PositionCache::at(CellPos pos) const {
    auto it = by_pos_.find(pos);
    if (it == by_pos_.end()) return std::nullopt;
    return it->second;
}

std::optional<CellPos> PositionCache::locate(ImageId id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

void PositionCache::erase(CellPos pos) {
    auto it = by_pos_.find(pos);
    if (it == by_pos_.end()) return;
    by_id_.erase(it->second);
    by_pos_.erase(it);
}

void PositionCache::clear() {
    by_pos_.clear();
    by_id_.clear();
}

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = mix(base);
    for (std::uint64_t p : parts) h = mix(h ^ p);
    return h;
}

FeatureRecord as_record(const GraphNode& node) {
    FeatureRecord r;
    r.image_id = node.image_id;
    r.semantic = node.semantic;
    r.visual = node.visual;
    return r;
}

}  // namespace

std::vector<Transition> transitions_between(const std::vector<MapCell>& before, const std::vector<MapCell>& after) {
    std::unordered_map<ImageId, const MapCell*> old_pos;
    for (const auto& c : before) old_pos.emplace(c.id, &c);
    std::vector<Transition> out;
    for (const auto& c : after) {
        auto it = old_pos.find(c.id);
        if (it != old_pos.end()) out.push_back({c.id, it->second->x, it->second->y, c.x, c.y});
    }
    std::sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) { return a.id < b.id; });
    return out;
}

Navigator::Navigator(std::shared_ptr<const HierarchicalGraph> graph, std::shared_ptr<const KeywordIndex> keywords,
                     NavigatorOptions options)
    : graph_(std::move(graph)), keywords_(std::move(keywords)), options_(options) {
    if (!graph_ || graph_->layers.empty()) throw Error(ErrorCode::EmptyCollection, "navigator needs a graph");
    if (!keywords_) keywords_ = std::make_shared<KeywordIndex>();
    if (options_.viewport_cols < 2 || options_.viewport_rows < 2) {
        throw Error(ErrorCode::OutOfRange, "viewport must be at least 2 x 2");
    }
}

SessionState Navigator::new_session(std::string session_id) const {
    SessionState s;
    s.session_id = std::move(session_id);
    s.viewport.cols = options_.viewport_cols;
    s.viewport.rows = options_.viewport_rows;
    s.viewport.layer = std::min(options_.search_layer, graph_->layer_count() - 1);
    return s;
}

const GraphNode& Navigator::node_anywhere(ImageId id) const {
    for (const auto& layer : graph_->layers) {
        if (const GraphNode* n = layer.find(id)) return *n;
    }
    throw Error(ErrorCode::NotFound, "image " + std::to_string(id) + " not in graph");
}

ImageId Navigator::closest_in_layer(ImageId id, std::size_t layer_index) const {
    const GraphLayer& layer = graph_->layers.at(layer_index);
    if (layer.contains(id)) return id;
    const SemanticFeature& target = node_anywhere(id).semantic;
    ImageId best = kNullId;
    std::uint64_t best_cost = 0;
    for (const auto& n : layer.nodes()) {
        const std::uint64_t cost = squared_byte_distance(target, n.semantic);
        if (best == kNullId || cost < best_cost || (cost == best_cost && n.image_id < best)) {
            best = n.image_id;
            best_cost = cost;
        }
    }
    return best;
}

std::vector<KeywordRegion> Navigator::find_keyword_regions(std::string_view keyword) const {
    const std::string normalized = normalize_keyword(keyword);
    const GraphLayer& base = graph_->base();
    std::unordered_set<ImageId> matching;
    if (!normalized.empty()) {
        for (ImageId id : keywords_->find(normalized)) {
            if (base.contains(id)) matching.insert(id);
        }
    }
    if (matching.empty()) throw Error(ErrorCode::KeywordNotFound, "no image carries '" + normalized + "'");

    std::vector<ImageId> ordered(matching.begin(), matching.end());
    std::sort(ordered.begin(), ordered.end());
    std::unordered_set<ImageId> seen;
    std::vector<KeywordRegion> regions;
    for (ImageId start : ordered) {
        if (seen.contains(start)) continue;
        KeywordRegion region;
        region.keyword = normalized;
        std::queue<ImageId> q;
        q.push(start);
        seen.insert(start);
        while (!q.empty()) {
            const ImageId u = q.front();
            q.pop();
            region.members.push_back(u);
            for (ImageId v : base.node(u).neighbors) {
                if (v != kNullId && matching.contains(v) && seen.insert(v).second) q.push(v);
            }
        }
        std::sort(region.members.begin(), region.members.end());
        regions.push_back(std::move(region));
    }
    std::sort(regions.begin(), regions.end(), [](const KeywordRegion& a, const KeywordRegion& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.members.front() < b.members.front();
    });

    for (auto& region : regions) {
        std::vector<ImageId> candidates = region.members;
        if (candidates.size() > options_.medoid_sample) {
            std::vector<ImageId> sample;
            std::mt19937_64 rng(derive_seed(options_.seed, {candidates.front(), candidates.size()}));
            std::sample(candidates.begin(), candidates.end(), std::back_inserter(sample), options_.medoid_sample, rng);
            candidates = std::move(sample);
        }
        // Medoid: minimal total squared distance, i.e. maximal total similarity.
        ImageId best = kNullId;
        std::uint64_t best_total = 0;
        for (ImageId a : candidates) {
            std::uint64_t total = 0;
            const auto& sa = base.node(a).semantic;
            for (ImageId b : candidates) total += squared_byte_distance(sa, base.node(b).semantic);
            if (best == kNullId || total < best_total || (total == best_total && a < best)) {
                best = a;
                best_total = total;
            }
        }
        region.representative = best;
    }
    return regions;
}

std::vector<MapCell> Navigator::visible_cells(const SessionState& session) const {
    std::vector<MapCell> out;
    auto found = session.caches.find(session.viewport.layer);
    if (found == session.caches.end()) return out;
    const Viewport& vp = session.viewport;
    const auto& cells = found->second.cells();
    for (std::int64_t y = vp.origin_y; y < vp.origin_y + vp.rows; ++y) {
        auto it = cells.lower_bound(CellPos{vp.origin_x, y});
        for (; it != cells.end() && it->first.y == y && it->first.x < vp.origin_x + vp.cols; ++it) {
            out.push_back({it->second, it->first.x, it->first.y});
        }
    }
    return out;
}

MapResponse Navigator::visible_map(const SessionState& session) const {
    MapResponse r;
    r.layer = session.viewport.layer;
    r.cells = visible_cells(session);
    return r;
}

MapResponse Navigator::build_map(SessionState& session, std::size_t layer_index, ImageId center,
                                 CellPos anchor) const {
    const GraphLayer& layer = graph_->layers.at(layer_index);
    Viewport& vp = session.viewport;
    const auto cols = static_cast<std::size_t>(vp.cols);
    const auto rows = static_cast<std::size_t>(vp.rows);

    const std::vector<ImageId> ids = expand_neighborhood(layer, center, cols * rows);
    GridAssignment grid(rows, cols);
    const std::size_t center_row = rows / 2;
    const std::size_t center_col = cols / 2;
    const GraphNode& center_node = layer.node(center);
    grid.place(center_row, center_col, center_node.image_id, center_node.semantic, center_node.visual, true);
    std::vector<FeatureRecord> items;
    items.reserve(ids.size());
    for (std::size_t i = 1; i < ids.size(); ++i) items.push_back(as_record(layer.node(ids[i])));
    const GridAssignment sorted =
        sort_grid_constrained(items, grid, derive_seed(options_.seed, {layer_index, center}), options_.sort);

    vp.layer = layer_index;
    vp.origin_x = anchor.x - static_cast<std::int64_t>(center_col);
    vp.origin_y = anchor.y - static_cast<std::int64_t>(center_row);
    PositionCache& cache = session.caches[layer_index];
    cache.clear();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const GridCell& cell = sorted.at(r, c);
            if (cell.empty()) continue;
            cache.place({vp.origin_x + static_cast<std::int64_t>(c), vp.origin_y + static_cast<std::int64_t>(r)},
                        cell.image_id);
        }
    }
    session.has_map = true;
    session.center = center;
    return visible_map(session);
}

MapResponse Navigator::search(SessionState& session, std::string_view keyword) const {
    const auto regions = find_keyword_regions(keyword);
    const std::size_t layer = std::min(options_.search_layer, graph_->layer_count() - 1);
    const ImageId center = closest_in_layer(regions.front().representative, layer);
    MapResponse response = build_map(session, layer, center, CellPos{0, 0});
    for (std::size_t i = 1; i < regions.size() && response.related.size() < options_.max_related; ++i) {
        // Mapped into the working layer so a chip can be used with recenter.
        response.related.push_back({regions[i].keyword, closest_in_layer(regions[i].representative, layer)});
    }
    return response;
}

void Navigator::prune_stale(SessionState& session) const {
    for (auto it = session.caches.begin(); it != session.caches.end();) {
        if (it->first >= graph_->layer_count()) {
            it = session.caches.erase(it);
            continue;
        }
        const GraphLayer& layer = graph_->layers[it->first];
        std::vector<std::pair<CellPos, ImageId>> stale;
        for (const auto& [pos, id] : it->second.cells()) {
            if (!layer.contains(id)) stale.emplace_back(pos, id);
        }
        for (const auto& [pos, id] : stale) it->second.erase(pos);
        ++it;
    }
    if (session.viewport.layer >= graph_->layer_count()) {
        session.viewport.layer = graph_->layer_count() - 1;
        session.has_map = false;
    }
}

MapResponse Navigator::drag(SessionState& session, std::int64_t dx_cells, std::int64_t dy_cells) const {
    if (!session.has_map) throw Error(ErrorCode::NoMap, "drag before any search");
    prune_stale(session);
    if (!session.has_map) throw Error(ErrorCode::NoMap, "map layer no longer exists");
    Viewport& vp = session.viewport;
    vp.origin_x -= dx_cells;
    vp.origin_y -= dy_cells;
    const GraphLayer& layer = graph_->layers.at(vp.layer);
    PositionCache& cache = session.caches[vp.layer];

    std::vector<CellPos> empty;
    for (std::int64_t y = vp.origin_y; y < vp.origin_y + vp.rows; ++y) {
        for (std::int64_t x = vp.origin_x; x < vp.origin_x + vp.cols; ++x) {
            if (!cache.at({x, y})) empty.push_back({x, y});
        }
    }
    if (empty.empty()) return visible_map(session);

    // Border seeds: visible cached images 4-adjacent to the empty region.
    std::vector<ImageId> seeds;
    for (const MapCell& cell : visible_cells(session)) {
        const std::array<CellPos, 4> around{{{cell.x - 1, cell.y}, {cell.x + 1, cell.y}, {cell.x, cell.y - 1},
                                             {cell.x, cell.y + 1}}};
        const bool border = std::any_of(around.begin(), around.end(), [&](CellPos p) {
            return vp.contains(p) && !cache.at(p);
        });
        if (border) seeds.push_back(cell.id);
    }
    if (seeds.empty() && layer.contains(session.center)) seeds.push_back(session.center);

    std::vector<NeighborhoodWalker> walkers;
    for (ImageId s : seeds) walkers.emplace_back(layer, s);
    std::vector<FeatureRecord> items;
    std::unordered_set<ImageId> chosen;
    std::vector<bool> exhausted(walkers.size(), false);
    std::size_t live = walkers.size();
    while (items.size() < empty.size() && live > 0) {
        for (std::size_t w = 0; w < walkers.size() && items.size() < empty.size(); ++w) {
            if (exhausted[w]) continue;
            std::optional<ImageId> id;
            while ((id = walkers[w].next()) && (cache.contains(*id) || chosen.contains(*id))) {
            }
            if (!id) {
                exhausted[w] = true;
                --live;
                continue;
            }
            chosen.insert(*id);
            items.push_back(as_record(layer.node(*id)));
        }
    }

    const auto cols = static_cast<std::size_t>(vp.cols);
    const auto rows = static_cast<std::size_t>(vp.rows);
    GridAssignment grid(rows, cols);
    for (const MapCell& cell : visible_cells(session)) {
        const GraphNode& n = layer.node(cell.id);
        grid.place(static_cast<std::size_t>(cell.y - vp.origin_y), static_cast<std::size_t>(cell.x - vp.origin_x),
                   n.image_id, n.semantic, n.visual, true);
    }
    const auto seed = derive_seed(options_.seed, {vp.layer, static_cast<std::uint64_t>(vp.origin_x),
                                                  static_cast<std::uint64_t>(vp.origin_y)});
    const GridAssignment filled = sort_grid_constrained(items, grid, seed, options_.sort);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const GridCell& cell = filled.at(r, c);
            if (cell.empty() || cell.frozen) continue;
            cache.place({vp.origin_x + static_cast<std::int64_t>(c), vp.origin_y + static_cast<std::int64_t>(r)},
                        cell.image_id);
        }
    }
    return visible_map(session);
}

MapResponse Navigator::zoom(SessionState& session, ZoomDirection direction, std::int64_t focus_x,
                            std::int64_t focus_y) const {
    if (!session.has_map) throw Error(ErrorCode::NoMap, "zoom before any search");
    prune_stale(session);
    if (!session.has_map) throw Error(ErrorCode::NoMap, "map layer no longer exists");
    const std::size_t layer = session.viewport.layer;
    if (direction == ZoomDirection::In && layer == 0) throw Error(ErrorCode::AtBottomLayer, "already at layer 0");
    if (direction == ZoomDirection::Out && layer + 1 >= graph_->layer_count()) {
        throw Error(ErrorCode::AtTopLayer, "already at the top layer");
    }
    const std::size_t target = direction == ZoomDirection::In ? layer - 1 : layer + 1;

    // The focus cell's image, or the visible image closest to it.
    const CellPos focus{focus_x, focus_y};
    const std::vector<MapCell> before = visible_cells(session);
    ImageId focus_id = graph_->layers[layer].contains(session.center) ? session.center : kNullId;
    std::int64_t best = -1;
    for (const MapCell& cell : before) {
        const std::int64_t d = std::abs(cell.x - focus.x) + std::abs(cell.y - focus.y);
        if (best < 0 || d < best) {
            best = d;
            focus_id = cell.id;
        }
    }
    if (focus_id == kNullId) throw Error(ErrorCode::NoMap, "nothing visible to zoom on");
    const ImageId center = closest_in_layer(focus_id, target);
    MapResponse response = build_map(session, target, center, focus);
    response.transitions = transitions_between(before, response.cells);
    return response;
}

MapResponse Navigator::recenter(SessionState& session, ImageId id) const {
    prune_stale(session);
    const std::size_t layer = session.viewport.layer;
    if (!graph_->layers.at(layer).contains(id)) {
        throw Error(ErrorCode::NotFound, "image " + std::to_string(id) + " not in layer " + std::to_string(layer));
    }
    const std::vector<MapCell> before = visible_cells(session);
    CellPos anchor = session.viewport.central_cell();
    if (auto cache = session.caches.find(layer); cache != session.caches.end()) {
        if (auto pos = cache->second.locate(id)) anchor = *pos;
    }
    MapResponse response = build_map(session, layer, id, anchor);
    response.transitions = transitions_between(before, response.cells);
    return response;
}

}  // namespace imgraph
