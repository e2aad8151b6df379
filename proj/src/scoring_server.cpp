#include <httplib.h>

#include <spdlog/spdlog.h>

#include "dashreport/error.hpp"
#include "dashreport/scoring.hpp"

namespace dashreport {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::string bearer_token(const httplib::Request& req) {
  auto h = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (h.rfind(kPrefix, 0) != 0) return {};
  return h.substr(kPrefix.size());
}

// Runs a handler and maps library errors onto HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const AuthError& e) {
    send_error(res, 403, e.what());
  } catch (const SessionError& e) {
    send_error(res, 400, e.what());
  } catch (const InvalidInputError& e) {
    send_error(res, 400, e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, std::string("bad request body: ") + e.what());
  } catch (const std::exception& e) {
    spdlog::error("scoring server: {}", e.what());
    send_error(res, 500, "internal error");
  }
}

}  // namespace

struct ScoringServer::Impl {
  ScoringService& service;
  Roster roster;
  std::map<std::string, MethodRun> runs;
  httplib::Server server;

  Impl(ScoringService& s, Roster r, std::vector<MethodRun> rs)
      : service(s), roster(std::move(r)) {
    for (auto& run : rs) {
      auto id = run.run_id;
      if (!runs.emplace(id, std::move(run)).second) {
        throw ConfigError("duplicate run_id " + id);
      }
    }
    // httplib defaults to SO_REUSEPORT, which lets a second server share a
    // busy port. Plain SO_REUSEADDR still allows a quick restart.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  bool is_admin(const httplib::Request& req) const {
    return bearer_token(req) == roster.admin_token;
  }

  // The bearer token must be the roster token of `evaluator_id`.
  bool is_evaluator(const httplib::Request& req,
                    const std::string& evaluator_id) const {
    auto it = roster.evaluator_tokens.find(evaluator_id);
    return it != roster.evaluator_tokens.end() && bearer_token(req) == it->second;
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      guarded(res, [&] {
        if (!is_admin(req)) return send_error(res, 401, "admin token required");
        auto body = nlohmann::json::parse(req.body);
        std::vector<MethodRun> selected;
        for (const auto& id : body.at("runs").get<std::vector<std::string>>()) {
          auto it = runs.find(id);
          if (it == runs.end()) throw NotFoundError("unknown run " + id);
          selected.push_back(it->second);
        }
        auto evaluators = body.contains("evaluators")
                              ? body["evaluators"].get<std::vector<std::string>>()
                              : roster.evaluator_ids();
        for (const auto& e : evaluators) {
          if (!roster.evaluator_tokens.contains(e)) {
            throw SessionError("evaluator " + e + " has no roster token");
          }
        }
        auto seed = body.value("seed", std::uint64_t{0});
        auto s = service.create_session(std::move(selected), std::move(evaluators), seed);
        nlohmann::ordered_json out;
        out["session_id"] = s.session_id;
        auto pairs = nlohmann::ordered_json::array();
        for (const auto& p : s.pairs) {
          pairs.push_back({{"pair_id", p.pair_id}, {"video_id", p.video_id}});
        }
        out["pairs"] = std::move(pairs);
        out["excluded"] = s.excluded;
        send_json(res, 201, out);
      });
    });

    server.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
      guarded(res, [&] {
        const std::string sid = req.matches[1];
        auto evaluator = req.get_param_value("evaluator");
        if (!is_evaluator(req, evaluator)) {
          return send_error(res, 401, "evaluator token required");
        }
        auto pair = service.next_pair(sid, evaluator);
        const int total = static_cast<int>(service.session(sid).pairs.size());
        nlohmann::ordered_json out;
        if (pair) {
          out["status"] = "pair";
          out["pair_id"] = pair->pair_id;
          out["left_text"] = pair->left_text;
          out["right_text"] = pair->right_text;
          out["progress"] = {{"done", pair->done}, {"total", pair->total}};
        } else {
          out["status"] = "done";
          out["progress"] = {{"done", total}, {"total", total}};
          out["tally"] = service.evaluator_tally(sid, evaluator);
        }
        send_json(res, 200, out);
      });
    });

    server.Post(R"(/sessions/([^/]+)/votes)", [this](const httplib::Request& req,
                                                     httplib::Response& res) {
      guarded(res, [&] {
        const std::string sid = req.matches[1];
        auto body = nlohmann::json::parse(req.body);
        auto evaluator = body.at("evaluator").get<std::string>();
        if (!is_evaluator(req, evaluator)) {
          return send_error(res, 401, "evaluator token required");
        }
        auto choice = parse_screen_choice(body.at("choice").get<std::string>());
        if (!choice) return send_error(res, 400, "choice must be A, B or Tie");
        auto pair_id = body.at("pair_id").get<int>();
        service.submit_vote(sid, evaluator, pair_id, *choice);
        send_json(res, 200, {{"ok", true}, {"pair_id", pair_id}});
      });
    });

    server.Get(R"(/sessions/([^/]+)/results)", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
      guarded(res, [&] {
        if (!is_admin(req)) return send_error(res, 401, "admin token required");
        const std::string sid = req.matches[1];
        auto session = service.session(sid);
        send_json(res, 200, aggregate_to_json(session, service.results(sid)));
      });
    });
  }
};

ScoringServer::ScoringServer(ScoringService& service, Roster roster,
                             std::vector<MethodRun> runs)
    : impl_(std::make_unique<Impl>(service, std::move(roster), std::move(runs))) {}

ScoringServer::~ScoringServer() = default;

int ScoringServer::bind(const ServerOptions& options) {
  if (!options.ui_dir.empty()) {
    if (!impl_->server.set_mount_point("/", options.ui_dir.string())) {
      throw IoError("UI directory not found: " + options.ui_dir.string());
    }
  }
  int port = options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(options.host);
    if (port < 0) throw IoError("cannot bind " + options.host);
  } else if (!impl_->server.bind_to_port(options.host, port)) {
    throw IoError("cannot bind " + options.host + ":" + std::to_string(port));
  }
  return port;
}

void ScoringServer::listen() { impl_->server.listen_after_bind(); }

void ScoringServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void ScoringServer::stop() { impl_->server.stop(); }

}  // namespace dashreport
