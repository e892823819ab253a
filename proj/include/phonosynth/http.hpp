#pragma once

#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "phonosynth/session.hpp"

namespace phonosynth {

// Result document served by the HTTP API: base64 little-endian f32 tracks,
// trace, provenance, search segments and the preview outline per frame.
nlohmann::json result_json(const SynthesisResult& result, const EngineContext& ctx);

// JSON API over a SessionStore:
//   POST /sessions                               create (trains unless a model is given)
//   GET  /sessions                               list ids
//   GET  /sessions/{id}                          summary and history
//   POST /sessions/{id}/edits                    {text, style, overrides, location, cost, alignment}
//   GET  /sessions/{id}/results/{rid}            result document
//   POST /sessions/{id}/results/{rid}/refine     {overrides} or a bare overrides object
//   POST /sessions/{id}/history/{seq}/replay     {identical}
// Errors come back as {error, kind} with 400/404/422/500.
class HttpServer {
 public:
  explicit HttpServer(SessionStore& store);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace phonosynth
