#pragma once

// HTTP+JSON front of the session store.
//
//   POST /sessions                              create, body = config object
//   GET  /sessions/{id}                         summary
//   GET  /sessions/{id}/batch                   pending batch
//   POST /sessions/{id}/labels                  {"labels": [LabelRecord...]}
//   GET  /sessions/{id}/metrics                 metric history
//   GET  /sessions/{id}/items/{item}/image      original image bytes
//   GET  /sessions/{id}/items/{item}/text       {"id", "text"}
//
// Failures answer {"error": {"code", "message"}}.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Eigen before httplib.h: <resolv.h> defines _res
#include "shotclust/error.hpp"
#include "shotclust/session.hpp"
#include "json.hpp"
#include "httplib.h"

namespace shotclust {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::duplicate:
    case ErrorCode::conflict: return 409;
    case ErrorCode::degenerate: return 422;
    case ErrorCode::io_error: return 500;
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error:
    case ErrorCode::out_of_range: return 400;
  }
  return 500;
}

inline std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".pgm") return "image/x-portable-graymap";
  if (ext == ".ppm") return "image/x-portable-pixmap";
  if (ext == ".pnm") return "image/x-portable-anymap";
  return "application/octet-stream";
}

inline std::vector<LabelRecord> parse_label_records(const json& body) {
  const json& list = body.is_object() && body.contains("labels") ? body.at("labels") : body;
  require(list.is_array(), ErrorCode::invalid_argument, "expected an array of label records");
  std::vector<LabelRecord> out;
  for (const auto& r : list) {
    require(r.is_object() && r.contains("item_id") && r.at("item_id").is_string(),
            ErrorCode::invalid_argument, "label record needs a string item_id");
    require(r.contains("label_id") && r.at("label_id").is_number_integer(),
            ErrorCode::invalid_argument, "label record needs an integer label_id");
    const auto raw = r.at("label_id").get<long long>();
    require(raw >= 0, ErrorCode::out_of_range, "label_id " + std::to_string(raw) + " is negative");
    LabelRecord rec;
    rec.item_id = r.at("item_id").get<std::string>();
    rec.label_id = static_cast<std::size_t>(raw);
    if (r.contains("annotator")) rec.annotator = r.at("annotator").get<std::string>();
    if (r.contains("at")) rec.at = r.at("at").get<std::string>();
    out.push_back(std::move(rec));
  }
  return out;
}

class AnnotateService {
 public:
  explicit AnnotateService(SessionStore& store) : store_(store) { routes(); }

  httplib::Server& server() { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

 private:
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "parse_error", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& code,
                         const std::string& message) {
    send_json(res, status, json{{"error", {{"code", code}, {"message", message}}}});
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      fail(ErrorCode::parse_error, std::string("request body is not JSON: ") + e.what());
    }
  }

  const Item& item_of(LabelSession& s, const std::string& item_id) {
    return s.workspace().items[s.workspace().row(item_id)];
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });

    server_.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = parse_body(req);
      require(body.is_object(), ErrorCode::invalid_argument, "config must be a JSON object");
      if (!body.contains("mode")) body["mode"] = store_.workspace().mode;
      const auto cfg = session_config_from_json(body);
      const auto id = store_.create(cfg);
      auto& s = store_.get(id);
      send_json(res, 201, json{{"session_id", id}, {"iteration", s.iteration()}, {"config", to_json(cfg)}});
    }));

    server_.Get(R"(/sessions/([^/]+))",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto& s = store_.get(req.matches[1]);
                  send_json(res, 200,
                            json{{"session_id", s.id()},
                                 {"iteration", s.iteration()},
                                 {"finished", s.finished()},
                                 {"labeled", s.labels().size()},
                                 {"config", to_json(s.config())},
                                 {"taxonomy", s.workspace().taxonomy.labels()}});
                }));

    server_.Get(R"(/sessions/([^/]+)/batch)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, store_.get(req.matches[1]).batch_json());
                }));

    server_.Post(R"(/sessions/([^/]+)/labels)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   auto& s = store_.get(req.matches[1]);
                   const auto ack = s.submit(parse_label_records(parse_body(req)));
                   send_json(res, 200,
                             json{{"accepted", ack.accepted},
                                  {"remaining", ack.remaining},
                                  {"iteration", ack.iteration},
                                  {"finished", ack.finished}});
                 }));

    server_.Get(R"(/sessions/([^/]+)/metrics)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, store_.get(req.matches[1]).metrics_json());
                }));

    server_.Get(R"(/sessions/([^/]+)/items/([^/]+)/image)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto& item = item_of(store_.get(req.matches[1]), req.matches[2]);
                  std::ifstream in(item.image_path, std::ios::binary);
                  require(static_cast<bool>(in), ErrorCode::not_found,
                          "image for item \"" + item.id + "\" is unavailable");
                  std::ostringstream ss;
                  ss << in.rdbuf();
                  res.status = 200;
                  res.set_content(ss.str(), content_type_for(item.image_path).c_str());
                }));

    server_.Get(R"(/sessions/([^/]+)/items/([^/]+)/text)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto& item = item_of(store_.get(req.matches[1]), req.matches[2]);
                  send_json(res, 200, json{{"id", item.id}, {"text", item.text}});
                }));
  }

  SessionStore& store_;
  httplib::Server server_;
};

}  // namespace shotclust
