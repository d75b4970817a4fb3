#include "imgraph/http_server.hpp"

#include <httplib.h>

namespace imgraph {

struct HttpServer::Impl {
    httplib::Server server;
};

namespace {

void forward(ApiHandler& handler, const httplib::Request& req, httplib::Response& res) {
    ApiRequest request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [key, value] : req.params) request.query.emplace(key, value);
    request.body = req.body;
    const ApiResponse response = handler.handle(request);
    res.status = response.status;
    res.set_content(response.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(ApiHandler& handler) : impl_(std::make_unique<Impl>()) {
    auto route = [&handler](const httplib::Request& req, httplib::Response& res) { forward(handler, req, res); };
    impl_->server.Get(R"(/api/.*)", route);
    impl_->server.Post(R"(/api/.*)", route);
    impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    impl_->server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace imgraph
