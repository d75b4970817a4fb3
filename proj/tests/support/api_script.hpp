#pragma once

// A fixed collection plus a scripted API conversation, shared by the API
// golden test and the acceptance binary.

#include <json.hpp>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "imgraph/api.hpp"
#include "imgraph/collection.hpp"

namespace imgraph::fixtures {

inline Collection api_collection() {
    auto records = generate_synthetic(4, 150, true, 21);
    for (auto& r : records) {
        if (r.image_id % 9 == 0) r.keywords.push_back("Nine");
    }
    Collection c = build_collection(std::move(records), {.seed = 21});
    c.url_template = "https://img.example/{id}.jpg";
    return c;
}

inline ApiOptions api_options(const Collection& c) {
    ApiOptions opt;
    opt.url_template = c.url_template;
    opt.session_seed = 1;
    return opt;
}

struct Exchange {
    ApiRequest request;
    ApiResponse response;
};

inline std::string exchange_line(const Exchange& e) {
    nlohmann::ordered_json j;
    j["method"] = e.request.method;
    j["path"] = e.request.path;
    if (!e.request.query.empty()) j["query"] = e.request.query;
    if (!e.request.body.empty()) j["body"] = e.request.body;
    j["status"] = e.response.status;
    j["response"] = nlohmann::json::parse(e.response.body);
    return j.dump();
}

/// Checks a response body against the documented shape for its endpoint.
/// Returns a description of the first mismatch.
inline std::optional<std::string> check_shape(const std::string& path, int status, const std::string& body) {
    using nlohmann::json;
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return "not a JSON object";
    auto exact_keys = [](const json& o, std::initializer_list<const char*> keys) {
        if (!o.is_object() || o.size() != keys.size()) return false;
        for (const char* k : keys) {
            if (!o.contains(k)) return false;
        }
        return true;
    };
    auto ints = [](const json& o, std::initializer_list<const char*> keys) {
        for (const char* k : keys) {
            if (!o.at(k).is_number_integer()) return false;
        }
        return true;
    };
    if (status >= 400) {
        if (!exact_keys(j, {"error"}) || !j["error"].is_string()) return "error body must be {\"error\": string}";
        const std::string e = j["error"];
        std::set<std::pair<int, std::string>> allowed{{400, "BadRequest"}, {404, "UnknownSession"}};
        if (path == "/api/search") allowed.insert({404, "KeywordNotFound"});
        if (path == "/api/drag") allowed.insert({409, "NoMap"});
        if (path == "/api/zoom") {
            allowed.insert({409, "AtTopLayer"});
            allowed.insert({409, "AtBottomLayer"});
            allowed.insert({409, "NoMap"});
        }
        if (path == "/api/recenter") allowed.insert({404, "NotFound"});
        if (!path.starts_with("/api/") || path == "/api/unknown") allowed = {{404, "NotFound"}};
        if (!allowed.contains({status, e})) return "unexpected error " + std::to_string(status) + " " + e;
        return std::nullopt;
    }
    if (path == "/api/config") {
        if (status != 200 || !exact_keys(j, {"urlTemplate", "viewportCols", "viewportRows", "layers"}) ||
            !j["urlTemplate"].is_string() || !ints(j, {"viewportCols", "viewportRows", "layers"})) {
            return "bad config body";
        }
        return std::nullopt;
    }
    if (path == "/api/session") {
        if (status != 201 || !exact_keys(j, {"sessionId"}) || !j["sessionId"].is_string()) return "bad session body";
        return std::nullopt;
    }
    if (status != 200) return "unexpected status " + std::to_string(status);
    if (!exact_keys(j, {"layer", "cells", "related", "transitions"}) || !j["layer"].is_number_integer()) {
        return "bad MapResponse keys";
    }
    if (!j["cells"].is_array() || !j["related"].is_array() || !j["transitions"].is_array()) return "arrays expected";
    for (const auto& c : j["cells"]) {
        if (!exact_keys(c, {"id", "x", "y"}) || !ints(c, {"id", "x", "y"})) return "bad cell";
    }
    for (const auto& r : j["related"]) {
        if (!exact_keys(r, {"label", "id"}) || !r["label"].is_string() || !ints(r, {"id"})) return "bad related";
    }
    for (const auto& t : j["transitions"]) {
        if (!exact_keys(t, {"id", "fromX", "fromY", "toX", "toY"}) || !ints(t, {"id", "fromX", "fromY", "toX", "toY"})) {
            return "bad transition";
        }
    }
    return std::nullopt;
}

/// Runs the scripted conversation; every endpoint and every error path appears.
inline std::vector<Exchange> run_api_script(ApiHandler& api) {
    std::vector<Exchange> out;
    auto call = [&](std::string method, std::string path, std::map<std::string, std::string> query = {},
                    std::string body = {}) {
        ApiRequest req{std::move(method), std::move(path), std::move(query), std::move(body)};
        out.push_back({req, api.handle(req)});
        return out.back().response;
    };
    call("GET", "/api/config");
    const std::string sid = nlohmann::json::parse(call("POST", "/api/session").body).at("sessionId");
    const std::string s = "\"session\":\"" + sid + "\"";
    call("POST", "/api/drag", {}, "{" + s + ",\"dx\":1,\"dy\":0}");
    call("GET", "/api/search", {{"session", sid}, {"q", "balloon"}});
    call("GET", "/api/search", {{"session", sid}, {"q", "kw2"}});
    call("POST", "/api/drag", {}, "{" + s + ",\"dx\":2,\"dy\":-1}");
    call("POST", "/api/drag", {}, "{" + s + ",\"dx\":-2,\"dy\":1}");
    call("POST", "/api/zoom", {}, "{" + s + ",\"direction\":\"in\",\"focusX\":1,\"focusY\":0}");
    call("POST", "/api/zoom", {}, "{" + s + ",\"direction\":\"in\",\"focusX\":1,\"focusY\":0}");
    call("POST", "/api/zoom", {}, "{" + s + ",\"direction\":\"out\",\"focusX\":1,\"focusY\":0}");
    call("POST", "/api/zoom", {}, "{" + s + ",\"direction\":\"out\",\"focusX\":0,\"focusY\":0}");
    call("POST", "/api/zoom", {}, "{" + s + ",\"direction\":\"out\",\"focusX\":0,\"focusY\":0}");
    call("POST", "/api/zoom", {}, "{" + s + ",\"direction\":\"out\",\"focusX\":0,\"focusY\":0}");
    call("GET", "/api/search", {{"session", sid}, {"q", "NINE"}});
    call("POST", "/api/recenter", {}, "{" + s + ",\"imageId\":4000000}");
    const auto searched = nlohmann::json::parse(out[out.size() - 2].response.body);
    call("POST", "/api/recenter", {}, "{" + s + ",\"imageId\":" + std::to_string(searched["related"][0]["id"].get<int>()) + "}");
    call("POST", "/api/recenter", {}, "{" + s + ",\"imageId\":-5}");
    call("GET", "/api/search", {{"session", "nobody"}, {"q", "kw0"}});
    call("POST", "/api/drag", {}, "{" + s + ",\"dx\":\"one\",\"dy\":0}");
    call("POST", "/api/drag", {}, "not json");
    call("POST", "/api/zoom", {}, "{" + s + ",\"direction\":\"sideways\",\"focusX\":0,\"focusY\":0}");
    call("GET", "/api/search", {{"session", sid}});
    call("GET", "/api/unknown");
    return out;
}

}  // namespace imgraph::fixtures
