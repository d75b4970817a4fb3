#include "imgraph/api.hpp"

#include <cstdio>
#include <json.hpp>

#include "imgraph/error.hpp"

namespace imgraph {

using nlohmann::json;

namespace {

struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ApiResponse error_response(int status, std::string_view name) {
    return {status, json{{"error", name}}.dump()};
}

int status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::KeywordNotFound:
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::NoMap:
        case ErrorCode::AtTopLayer:
        case ErrorCode::AtBottomLayer:
            return 409;
        case ErrorCode::OutOfRange:
            return 400;
        default:
            return 500;
    }
}

json parse_body(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw BadRequest("body is not a JSON object");
    return j;
}

std::string string_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw BadRequest(std::string("missing string field ") + key);
    return it->get<std::string>();
}

std::int64_t int_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) throw BadRequest(std::string("missing integer field ") + key);
    if (it->is_number_unsigned() && it->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        throw BadRequest(std::string("field out of range: ") + key);
    }
    return it->get<std::int64_t>();
}

}  // namespace

std::string to_json(const MapResponse& map) {
    json cells = json::array();
    for (const auto& c : map.cells) cells.push_back({{"id", c.id}, {"x", c.x}, {"y", c.y}});
    json related = json::array();
    for (const auto& r : map.related) related.push_back({{"label", r.label}, {"id", r.id}});
    json transitions = json::array();
    for (const auto& t : map.transitions) {
        transitions.push_back({{"id", t.id}, {"fromX", t.from_x}, {"fromY", t.from_y}, {"toX", t.to_x}, {"toY", t.to_y}});
    }
    return json{{"layer", map.layer}, {"cells", cells}, {"related", related}, {"transitions", transitions}}.dump();
}

ApiHandler::ApiHandler(GraphSource graph, std::shared_ptr<const KeywordIndex> keywords, ApiOptions options,
                       Clock clock)
    : graph_(std::move(graph)), keywords_(std::move(keywords)), options_(std::move(options)), clock_(std::move(clock)) {
    if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
    if (!keywords_) keywords_ = std::make_shared<KeywordIndex>();
    id_rng_.seed(options_.session_seed ? *options_.session_seed : std::random_device{}());
}

Navigator ApiHandler::navigator() const { return Navigator(graph_(), keywords_, options_.navigator); }

std::size_t ApiHandler::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

std::size_t ApiHandler::evict_idle() {
    const auto now = clock_();
    std::lock_guard lock(sessions_mutex_);
    return std::erase_if(sessions_, [&](const auto& entry) {
        std::unique_lock session_lock(entry.second->mutex, std::try_to_lock);
        return session_lock.owns_lock() && now - entry.second->last_used > options_.session_idle;
    });
}

ApiResponse ApiHandler::config() const {
    return {200, json{{"urlTemplate", options_.url_template},
                      {"viewportCols", options_.navigator.viewport_cols},
                      {"viewportRows", options_.navigator.viewport_rows},
                      {"layers", graph_()->layer_count()}}
                     .dump()};
}

ApiResponse ApiHandler::create_session() {
    evict_idle();
    auto session = std::make_shared<Session>();
    std::lock_guard lock(sessions_mutex_);
    std::string id;
    do {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
        id = buf;
    } while (sessions_.contains(id));
    session->state = navigator().new_session(id);
    session->last_used = clock_();
    sessions_.emplace(id, session);
    return {201, json{{"sessionId", id}}.dump()};
}

std::shared_ptr<ApiHandler::Session> ApiHandler::lookup(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return nullptr;
    return it->second;
}

ApiResponse ApiHandler::handle(const ApiRequest& request) {
    try {
        if (request.path == "/api/config" && request.method == "GET") return config();
        if (request.path == "/api/session" && request.method == "POST") return create_session();

        std::string session_id;
        json body;
        if (request.path == "/api/search" && request.method == "GET") {
            auto s = request.query.find("session");
            if (s == request.query.end()) throw BadRequest("missing session");
            if (!request.query.contains("q")) throw BadRequest("missing q");
            session_id = s->second;
        } else if (request.method == "POST" &&
                   (request.path == "/api/drag" || request.path == "/api/zoom" || request.path == "/api/recenter")) {
            body = parse_body(request.body);
            session_id = string_field(body, "session");
        } else {
            return error_response(404, "NotFound");
        }

        auto session = lookup(session_id);
        if (!session) return error_response(404, "UnknownSession");
        std::lock_guard lock(session->mutex);
        session->last_used = clock_();
        // One snapshot for the whole request.
        const Navigator nav = navigator();
        SessionState& state = session->state;

        MapResponse map;
        if (request.path == "/api/search") {
            map = nav.search(state, request.query.at("q"));
        } else if (request.path == "/api/drag") {
            map = nav.drag(state, int_field(body, "dx"), int_field(body, "dy"));
        } else if (request.path == "/api/zoom") {
            const std::string direction = string_field(body, "direction");
            if (direction != "in" && direction != "out") throw BadRequest("direction must be in or out");
            map = nav.zoom(state, direction == "in" ? ZoomDirection::In : ZoomDirection::Out, int_field(body, "focusX"),
                           int_field(body, "focusY"));
        } else {
            const std::int64_t id = int_field(body, "imageId");
            if (id < 0 || id >= static_cast<std::int64_t>(kNullId)) return error_response(404, "NotFound");
            map = nav.recenter(state, static_cast<ImageId>(id));
        }
        return {200, to_json(map)};
    } catch (const BadRequest&) {
        return error_response(400, "BadRequest");
    } catch (const Error& e) {
        const int status = status_of(e.code());
        return error_response(status, status == 500 ? std::string_view("Internal") : to_string(e.code()));
    } catch (const std::exception&) {
        return error_response(500, "Internal");
    }
}

}  // namespace imgraph
