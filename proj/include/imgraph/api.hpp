#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include "imgraph/features.hpp"
#include "imgraph/graph.hpp"
#include "imgraph/navigator.hpp"

namespace imgraph {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    std::string body;  // JSON
};

struct ApiOptions {
    NavigatorOptions navigator{};
    std::string url_template = "{id}";
    std::chrono::seconds session_idle{30 * 60};
    /// Session id generator seed; unset draws from std::random_device.
    std::optional<std::uint64_t> session_seed;
};

using GraphSource = std::function<std::shared_ptr<const HierarchicalGraph>()>;
using Clock = std::function<std::chrono::steady_clock::time_point()>;

std::string to_json(const MapResponse& map);

/// HTTP-independent request handling. Safe to call from many threads;
/// requests on one session run one at a time.
class ApiHandler {
public:
    ApiHandler(GraphSource graph, std::shared_ptr<const KeywordIndex> keywords, ApiOptions options = {},
               Clock clock = nullptr);

    ApiResponse handle(const ApiRequest& request);

    std::size_t session_count() const;
    /// Drops sessions idle longer than the configured limit; returns how many.
    std::size_t evict_idle();

private:
    struct Session {
        std::mutex mutex;
        SessionState state;
        std::chrono::steady_clock::time_point last_used;
    };

    ApiResponse config() const;
    ApiResponse create_session();
    std::shared_ptr<Session> lookup(const std::string& id);
    Navigator navigator() const;

    GraphSource graph_;
    std::shared_ptr<const KeywordIndex> keywords_;
    ApiOptions options_;
    Clock clock_;

    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mt19937_64 id_rng_;
};

}  // namespace imgraph
