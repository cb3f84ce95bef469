#include "httplib.h"
#include "medsr/study.hpp"

namespace medsr {

struct StudyHttpServer::Impl {
  StudyService& service;
  httplib::Server server;
  explicit Impl(StudyService& s) : service(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int parse_factor(const std::string& text) {
  try {
    std::size_t used = 0;
    const int f = std::stoi(text, &used);
    if (used == text.size()) return f;
  } catch (const std::exception&) {
  }
  throw StudyBadRequest("factor must be an integer");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const StudyBadRequest& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const nlohmann::json::parse_error& e) {
    send_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
  } catch (const StudyNotFound& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

}  // namespace

StudyHttpServer::StudyHttpServer(StudyService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  StudyService& svc = service;

  srv.Get("/api/session", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("annotator") || !req.has_param("factor")) {
        throw StudyBadRequest("annotator and factor query parameters are required");
      }
      send_json(res, 200, svc.session(req.get_param_value("annotator"), parse_factor(req.get_param_value("factor"))));
    });
  });

  srv.Get(R"(/api/image/([^/]+)/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("annotator")) throw StudyBadRequest("annotator query parameter is required");
      const auto path = svc.image(req.get_param_value("annotator"), req.matches[1], req.matches[2]);
      std::ifstream in(path, std::ios::binary);
      if (!in) throw StudyNotFound("image missing on disk");
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      res.status = 200;
      res.set_content(std::move(bytes), "image/png");
    });
  });

  srv.Post("/api/vote", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.vote(nlohmann::json::parse(req.body))); });
  });

  srv.Get("/api/report", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.report()); });
  });
}

StudyHttpServer::~StudyHttpServer() { stop(); }

int StudyHttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void StudyHttpServer::listen() { impl_->server.listen_after_bind(); }

void StudyHttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace medsr
