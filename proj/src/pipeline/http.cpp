#include "phonosynth/http.hpp"

#include <bit>
#include <cstring>
#include <iostream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "phonosynth/errors.hpp"
#include "phonosynth/hash.hpp"

namespace phonosynth {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "f32 payloads assume a little-endian host");

template <std::size_t N>
std::string rows_f32(const std::vector<std::array<float, N>>& rows) {
  std::string bytes(rows.size() * N * 4, '\0');
  for (std::size_t i = 0; i < rows.size(); ++i) std::memcpy(bytes.data() + i * N * 4, rows[i].data(), N * 4);
  return bytes;
}

std::string b64(const std::string& bytes) { return httplib::detail::base64_encode(bytes); }

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& what,
                json extra = json::object()) {
  extra["error"] = what;
  extra["kind"] = kind;
  send(res, status, extra);
}

// Maps engine exceptions onto status codes.
void handle_exception(httplib::Response& res, std::exception_ptr ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const NotFoundError& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const OutOfVocabularyError& e) {
    send_error(res, 400, "out_of_vocabulary", e.what(), {{"word", e.word()}, {"suggestions", e.suggestions()}});
  } catch (const SchemaError& e) {
    send_error(res, 400, "schema", e.what(), {{"path", e.path()}});
  } catch (const UnknownTokenError& e) {
    send_error(res, 400, "unknown_token", e.what());
  } catch (const InvalidEditError& e) {
    send_error(res, 400, "invalid_edit", e.what());
  } catch (const AlignmentError& e) {
    send_error(res, 400, "alignment", e.what());
  } catch (const NoMatchError& e) {
    send_error(res, 422, "no_match", e.what(), {{"query", e.query()}});
  } catch (const TrainingError& e) {
    send_error(res, 422, "training", e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "schema", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  } catch (...) {
    send_error(res, 500, "internal", "unknown failure");
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("malformed JSON: ") + e.what());
  }
}

fs::path absolute_or_empty(const fs::path& p) { return p.empty() ? p : fs::absolute(p); }

}  // namespace

json result_json(const SynthesisResult& r, const EngineContext& ctx) {
  const StyleRepository& repo = ctx.style(r.request.style);
  json provenance = json::array();
  for (const FrameProvenance& p : r.trace.provenance) provenance.push_back({p.segment, p.source_time_s});
  json preview = nullptr;
  if (repo.bundle.preview_basis) {
    preview = json::array();
    for (const ExpressionFrame& f : r.track.frames) preview.push_back(repo.bundle.preview_basis->outline(f));
  }
  std::vector<std::array<float, kPoseDim>> pose;
  std::vector<std::array<float, kIlluminationDim>> illum;
  for (const FullFaceFrame& f : r.full) {
    pose.push_back(f.pose);
    illum.push_back(f.illumination);
  }
  const auto [a, b] = expansion_interval(ctx.target, r.track.duration_s(), r.request.location);
  json location = nullptr;
  if (r.request.location) location = {{"begin", r.request.location->begin}, {"end", r.request.location->end}};
  return {{"id", r.id},
          {"parent", r.parent},
          {"text", r.request.edit.text},
          {"style", r.request.style},
          {"edit", to_json(r.request.edit)},
          {"location", std::move(location)},
          {"cost", to_json(r.request.cost)},
          {"stitch", to_json(r.request.stitch)},
          {"fps", r.track.fps},
          {"frame_count", r.track.size()},
          {"dim", kExpressionDim},
          {"track", b64(encode_track_f32(r.track))},
          {"stitched", b64(encode_track_f32(r.stitched))},
          {"pose", b64(rows_f32(pose))},
          {"illumination", b64(rows_f32(illum))},
          {"expansion", {a, b}},
          {"trace", to_json(r.trace, false)},
          {"provenance", std::move(provenance)},
          {"segments", search_trace_json(r.request.edit.tokens, r.partition, repo.bundle).at("segments")},
          {"total_cost", r.partition.total_cost},
          {"preview", std::move(preview)},
          {"model_checksum", hex64(r.model_checksum)}};
}

struct HttpServer::Impl {
  SessionStore& store;
  httplib::Server server;

  explicit Impl(SessionStore& s) : store(s) {
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) { handle_exception(res, ep); });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"sessions", store.list()}});
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      SessionSpec spec = session_spec_from_json(parse_body(req), load_defaults());
      spec.target = fs::absolute(spec.target);
      for (auto& [_, p] : spec.repositories) p = fs::absolute(p);
      if (spec.model) spec.model = fs::absolute(*spec.model);
      spec.visemes = absolute_or_empty(spec.visemes);
      spec.lexicon = absolute_or_empty(spec.lexicon);
      auto session = store.create(std::move(spec), [](const EpochReport& r) {
        std::cerr << "train epoch " << r.epoch + 1 << " loss " << r.mean_loss << "\n";
      });
      send(res, 201, session->summary());
    });

    server.Get(R"(/sessions/([0-9a-fA-F]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, 200, store.get(req.matches[1])->summary());
    });

    server.Post(R"(/sessions/([0-9a-fA-F]+)/edits)", [this](const httplib::Request& req, httplib::Response& res) {
      auto session = store.get(req.matches[1]);
      const std::string rid = session->synthesize_edit(edit_request_from_json(parse_body(req)));
      send(res, 201, {{"result", rid}});
    });

    server.Get(R"(/sessions/([0-9a-fA-F]+)/results/([0-9a-fA-F]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto session = store.get(req.matches[1]);
                 send(res, 200, result_json(*session->result(req.matches[2]), session->context()));
               });

    server.Post(R"(/sessions/([0-9a-fA-F]+)/results/([0-9a-fA-F]+)/refine)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  auto session = store.get(req.matches[1]);
                  const json body = parse_body(req);
                  const json& ov = body.contains("overrides") ? body.at("overrides") : body;
                  const std::string rid = session->refine(req.matches[2], stitch_overrides_from_json(ov));
                  send(res, 201, {{"result", rid}, {"parent", std::string(req.matches[2])}});
                });

    server.Post(R"(/sessions/([0-9a-fA-F]+)/history/(\d+)/replay)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  auto session = store.get(req.matches[1]);
                  const std::size_t seq = std::stoul(req.matches[2]);
                  send(res, 200, {{"seq", seq}, {"identical", session->replay(seq)}});
                });
  }

  EngineConfig load_defaults() const {
    const fs::path p = default_config_dir() / "defaults.toml";
    return fs::exists(p) ? load_engine_config(p) : EngineConfig{};
  }
};

HttpServer::HttpServer(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace phonosynth
