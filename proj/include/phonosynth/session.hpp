#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phonosynth/config.hpp"
#include "phonosynth/pipeline.hpp"

namespace phonosynth {

inline constexpr const char* kSessionFormat = "phonosynth-session/1";

// What a session is built from. Relative paths are taken as given (the
// caller resolves them). Without `model` a model is trained on the neutral
// repository with `engine.model` / `engine.train`.
struct SessionSpec {
  std::filesystem::path target;
  std::map<std::string, std::filesystem::path> repositories;  // style -> bundle; needs "neutral"
  std::optional<std::filesystem::path> model;
  std::filesystem::path visemes;  // empty: default config dir
  std::filesystem::path lexicon;
  EngineConfig engine;
};

nlohmann::json to_json(const SessionSpec& spec);
// Throws SchemaError. Missing engine keys keep the values in `defaults`.
SessionSpec session_spec_from_json(const nlohmann::json& j, const EngineConfig& defaults = {});

struct EditRequest {
  std::string text;
  std::string style = "neutral";
  StitchOverrides overrides;
  std::optional<CostConfig> cost;  // default: session engine config
  std::optional<EditLocation> location;
  std::optional<TokenSequence> alignment;
  double phoneme_rate = kDefaultPhonemeRate;
};

// Throws SchemaError; `alignment` is the text of an alignment file.
EditRequest edit_request_from_json(const nlohmann::json& j);

// One append-only history record. Edits carry the full request; refinements
// name their parent and overrides.
struct HistoryEntry {
  std::size_t seq = 0;
  std::string kind;  // "edit" or "refine"
  std::string result;
  std::string parent;
  SynthesisRequest request;
  StitchOverrides overrides;
};

nlohmann::json to_json(const HistoryEntry& entry);
HistoryEntry history_entry_from_json(const nlohmann::json& j);

using TrainProgress = std::function<void(const EpochReport&)>;

// Iterative editing state over one target clip. Operations on one session
// are serialized; results are immutable and shared.
class Session {
 public:
  // Loads inputs, trains or loads the model, and writes the session
  // directory. Throws Error when `dir` already exists.
  static std::shared_ptr<Session> create(std::string id, const std::filesystem::path& dir, SessionSpec spec,
                                         const TrainProgress& progress = {});
  // Rebuilds a session by re-running its history; throws Error when a
  // recomputed track differs from the stored one.
  static std::shared_ptr<Session> open(const std::filesystem::path& dir);

  const std::string& id() const { return id_; }
  const std::filesystem::path& dir() const { return dir_; }
  const EngineContext& context() const { return *ctx_; }
  const SessionSpec& spec() const { return spec_; }

  // Returns the result id. Identical requests give identical ids.
  std::string synthesize_edit(const EditRequest& request);
  std::string refine(const std::string& result_id, const StitchOverrides& overrides);

  // Throws NotFoundError.
  std::shared_ptr<const SynthesisResult> result(const std::string& result_id) const;
  std::vector<HistoryEntry> history() const;

  // Re-executes history entry `seq` from its recorded inputs and reports
  // whether track, stitched track and trace are bit-identical.
  bool replay(std::size_t seq) const;

  nlohmann::json summary() const;

 private:
  Session() = default;
  std::string commit(HistoryEntry entry, std::shared_ptr<const SynthesisResult> result);
  std::shared_ptr<const SynthesisResult> execute(const HistoryEntry& entry) const;
  void persist_result(const SynthesisResult& r) const;

  std::string id_;
  std::filesystem::path dir_;
  SessionSpec spec_;
  std::shared_ptr<const EngineContext> ctx_;
  std::mutex op_mu_;      // one writer at a time
  mutable std::mutex mu_;  // guards history_ and results_
  std::vector<HistoryEntry> history_;
  std::map<std::string, std::shared_ptr<const SynthesisResult>> results_;
};

// Sessions under one root directory, opened lazily from disk.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  std::shared_ptr<Session> create(SessionSpec spec, const TrainProgress& progress = {});
  // Throws NotFoundError.
  std::shared_ptr<Session> get(const std::string& id);
  std::vector<std::string> list() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> open_;
};

// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace phonosynth
