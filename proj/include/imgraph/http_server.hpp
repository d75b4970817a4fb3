#pragma once

#include <memory>
#include <string>

#include "imgraph/api.hpp"

namespace imgraph {

/// Routes /api/* to an ApiHandler over HTTP.
class HttpServer {
public:
    explicit HttpServer(ApiHandler& handler);
    ~HttpServer();

    /// Blocks until stop(). Returns false if the socket could not be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it (-1 on failure); call listen_after_bind next.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace imgraph
