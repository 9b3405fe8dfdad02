#include <httplib.h>

#include "recon/error.hpp"
#include "recon/server/service.hpp"

namespace recon::server {

using nlohmann::json;

struct HttpServer::Impl {
  Service& svc;
  httplib::Server http;

  explicit Impl(Service& s) : svc(s) { routes(); }

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const ApiError& e) {
      send(res, e.status(), e.body());
    } catch (const Error& e) {
      send(res, 500, {{"schema", kErrorSchema}, {"error", std::string(to_string(e.code()))}, {"message", e.what()}});
    } catch (const json::exception& e) {
      send(res, 400, {{"schema", kErrorSchema}, {"error", "FormatError"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send(res, 500, {{"schema", kErrorSchema}, {"error", "Internal"}, {"message", e.what()}});
    }
  }

  static json body_json(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw ApiError(400, "FormatError", "request body is not JSON");
    return j;
  }

  static std::optional<int> int_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    try {
      std::size_t used = 0;
      auto v = req.get_param_value(name);
      int n = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ApiError(400, "InvalidArgument", std::string("query parameter ") + name + " must be an integer");
    }
  }

  static std::size_t from_param(const httplib::Request& req) {
    auto v = int_param(req, "from");
    return v && *v > 0 ? static_cast<std::size_t>(*v) : 0;
  }

  void routes() {
    http.Post("/projects", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 201, svc.create_project(req.body)); });
    });
    http.Get(R"(/projects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.get_project(req.matches[1])); });
    });
    http.Get(R"(/projects/([^/]+)/functions)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.list_functions(req.matches[1])); });
    });
    http.Get(R"(/projects/([^/]+)/functions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.function_view(req.matches[1], req.matches[2])); });
    });
    http.Get(R"(/projects/([^/]+)/functions/([^/]+)/context)",
             [this](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 send(res, 200,
                      svc.preview_context(req.matches[1], req.matches[2], int_param(req, "depth"), int_param(req, "k")));
               });
             });
    http.Post(R"(/projects/([^/]+)/functions/([^/]+)/runs)",
              [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] { send(res, 202, svc.launch_run(req.matches[1], req.matches[2], body_json(req))); });
              });
    http.Get(R"(/projects/([^/]+)/overlay)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.overlay(req.matches[1])); });
    });
    http.Get(R"(/projects/([^/]+)/audit)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.audit(req.matches[1])); });
    });
    http.Get(R"(/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.get_run(req.matches[1], from_param(req))); });
    });
    http.Get(R"(/runs/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { stream(req, res); });
    });
    http.Post(R"(/runs/([^/]+)/apply)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.apply(req.matches[1], body_json(req))); });
    });
    http.Post("/reports", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 201, svc.create_report(body_json(req))); });
    });
    http.Get(R"(/reports/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc.get_report(req.matches[1])); });
    });
  }

  // Event framing:
  //   event: chunk   data: {"offset": N, "text": "..."}
  //   event: done    data: <run record without reasoning>
  void stream(const httplib::Request& req, httplib::Response& res) {
    std::string id = req.matches[1];
    svc.get_run(id);  // 404 before the stream starts
    std::size_t offset = from_param(req);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, id, offset](std::size_t, httplib::DataSink& sink) mutable {
          auto [text, done] = svc.wait_run(id, offset, 0.25);
          if (!text.empty()) {
            json ev = {{"offset", offset}, {"text", text}};
            offset += text.size();
            std::string frame = "event: chunk\ndata: " + ev.dump() + "\n\n";
            if (!sink.write(frame.data(), frame.size())) return false;
          }
          if (done) {
            auto rec = svc.get_run(id, offset);
            rec.erase("reasoning");
            std::string frame = "event: done\ndata: " + rec.dump() + "\n\n";
            sink.write(frame.data(), frame.size());
            sink.done();
          }
          return true;
        });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->http.bind_to_any_port(host);
  } else if (impl_->http.bind_to_port(host, port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port_;
}

void HttpServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!impl_->http.listen(host, port)) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  impl_->http.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace recon::server
