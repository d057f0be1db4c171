#include "imgseek/service.hpp"

#include <httplib.h>

#include <chrono>
#include <iostream>

namespace imgseek {

using nlohmann::json;

struct Server::Impl {
  Engine& engine;
  ServerOptions options;
  httplib::Server http;
  std::thread thread;

  Impl(Engine& e, ServerOptions o) : engine(e), options(std::move(o)) {}

  void respond(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  httplib::Server::Handler jsonEndpoint(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        json body;
        try {
          body = req.body.empty() ? json::object() : json::parse(req.body);
        } catch (const json::parse_error& e) {
          respond(res, 400, {{"error", "InvalidParameter"}, {"message", std::string("invalid JSON: ") + e.what()}});
          return;
        }
        respond(res, 200, fn(req, body));
      } catch (const Error& e) {
        respond(res, httpStatusFor(e.code()), {{"error", std::string(toString(e.code()))}, {"message", e.what()}});
      } catch (const std::exception& e) {
        respond(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  void routes() {
    http.set_payload_max_length(kMaxPayloadBytes);
    http.Post("/search", jsonEndpoint([this](const auto&, const json& b) { return engine.handleSearch(b); }));
    http.Post("/visual-search", jsonEndpoint([this](const auto&, const json& b) { return engine.handleVisualSearch(b); }));
    http.Post("/text-search", jsonEndpoint([this](const auto&, const json& b) { return engine.handleTextSearch(b); }));
    http.Post("/fuse", jsonEndpoint([this](const auto&, const json& b) { return engine.handleFuse(b); }));
    http.Post("/admin/index", jsonEndpoint([this](const auto&, const json& b) {
                return json{{"id", engine.submitIndexJob(b)}};
              }));
    http.Get(R"(/admin/index/([A-Za-z0-9_\-]+))", jsonEndpoint([this](const httplib::Request& req, const json&) {
               return engine.jobStatus(req.matches[1]);
             }));
    http.Get("/indices", jsonEndpoint([this](const auto&, const json&) { return json{{"indices", engine.indexNames()}}; }));
    http.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
      std::cerr << json{{"ts", now},
                        {"method", req.method},
                        {"path", req.path},
                        {"status", res.status},
                        {"requestBytes", req.body.size()},
                        {"responseBytes", res.body.size()}}
                       .dump()
                << '\n';
    });
  }

  int bind() {
    if (options.port == 0) return http.bind_to_any_port(options.host);
    if (!http.bind_to_port(options.host, options.port))
      throw Error(ErrorCode::Io, "cannot bind " + options.host + ":" + std::to_string(options.port));
    return options.port;
  }
};

Server::Server(Engine& engine, ServerOptions options) : impl_(std::make_unique<Impl>(engine, std::move(options))) {
  impl_->routes();
}

Server::~Server() { stop(); }

int Server::start() {
  const int port = impl_->bind();
  if (port <= 0) throw Error(ErrorCode::Io, "cannot bind " + impl_->options.host);
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::run() {
  const int port = impl_->bind();
  if (port <= 0) throw Error(ErrorCode::Io, "cannot bind " + impl_->options.host);
  std::cerr << json{{"event", "listening"}, {"host", impl_->options.host}, {"port", port}}.dump() << '\n';
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace imgseek
