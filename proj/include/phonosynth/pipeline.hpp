#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phonosynth/bundle.hpp"
#include "phonosynth/config.hpp"
#include "phonosynth/edit_script.hpp"
#include "phonosynth/lexicon.hpp"
#include "phonosynth/retarget.hpp"
#include "phonosynth/search.hpp"
#include "phonosynth/stitch.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

// Where the edit goes in the target transcript: the phoneme range
// [begin, end) is replaced; begin == end inserts before token `begin`.
struct EditLocation {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const EditLocation&, const EditLocation&) = default;
};

// A repository style ready for searching.
struct StyleRepository {
  RepositoryBundle bundle;
  BigramIndex index;

  static std::shared_ptr<const StyleRepository> make(RepositoryBundle bundle, const VisemeTable& table);
};

// Everything an edit is synthesized against. Immutable once built.
struct EngineContext {
  VisemeTable table;
  Lexicon lexicon;
  TargetClip target;
  std::map<std::string, std::shared_ptr<const StyleRepository>> styles;
  std::shared_ptr<const RetargetModel> model;  // trained on the neutral style

  const StyleRepository& style(const std::string& name) const;
};

// User-adjustable stitching deltas.
struct StitchOverrides {
  std::map<std::size_t, int> boundary_radius;
  std::map<std::size_t, int> closure_frames;

  bool empty() const { return boundary_radius.empty() && closure_frames.empty(); }
  friend bool operator==(const StitchOverrides&, const StitchOverrides&) = default;
};

StitchConfig apply_overrides(StitchConfig base, const StitchOverrides& overrides);

struct SynthesisRequest {
  EditScript edit;
  std::string style = "neutral";
  CostConfig cost;
  StitchConfig stitch;  // overrides already applied
  std::optional<EditLocation> location;  // default: insert at the end
};

struct SynthesisResult {
  std::string id;
  std::string parent;  // empty for fresh edits
  SynthesisRequest request;
  SearchContext context;
  PartitionResult partition;
  StitchTrace trace;
  ExpressionTrack stitched;     // source-actor space
  ExpressionTrack track;        // retargeted
  std::vector<FullFaceFrame> full;
  std::uint64_t model_checksum = 0;
};

// Transcript neighbours of the edit, moved onto the edit's timeline.
SearchContext context_for(const TargetClip& target, const TokenSequence& edit,
                          const std::optional<EditLocation>& location);

// Pose and illumination from the target interval around the edit, linearly
// retimed to the expression track's length; geometry and reflectance copied.
// Throws InvalidEditError when the location lies outside the clip.
std::vector<FullFaceFrame> expand_to_full(const TargetClip& target, const ExpressionTrack& track,
                                          const std::optional<EditLocation>& location);

// Target time interval [a, b] whose pose and illumination are reused.
std::pair<double, double> expansion_interval(const TargetClip& target, double edit_duration_s,
                                             const std::optional<EditLocation>& location);

// Content hash of everything that determines a result.
std::string result_id(const SynthesisRequest& request, std::uint64_t model_checksum);

// search -> stitch -> retarget -> expand. Throws NoMatchError, Error for an
// unknown style or a missing model.
SynthesisResult synthesize(const EngineContext& ctx, const SynthesisRequest& request);

// Re-runs stitching onward with new overrides, reusing the parent's
// partition. Throws InvalidEditError for unknown boundary or token indices.
SynthesisResult refine(const EngineContext& ctx, const SynthesisResult& parent, const StitchOverrides& overrides);

// Correspondences between the neutral repository and the target, then
// training from `model` initialization. Throws TrainingError when no
// correspondences exist.
TrainResult train_retargeting(const RepositoryBundle& neutral, const TargetClip& target, const VisemeTable& table,
                              const ModelConfig& model, const TrainConfig& train, const CostConfig& cost = {});

// JSON forms used by the trace files and the HTTP API.
nlohmann::json to_json(const SegmentMatch& seg);
nlohmann::json to_json(const PartitionResult& partition);
nlohmann::json to_json(const StitchTrace& trace, bool with_provenance = true);
nlohmann::json to_json(const CostConfig& cfg);
nlohmann::json to_json(const StitchConfig& cfg);
nlohmann::json to_json(const StitchOverrides& overrides);
StitchOverrides stitch_overrides_from_json(const nlohmann::json& j);
CostConfig cost_config_from_json(const nlohmann::json& j, CostConfig base = {});
StitchConfig stitch_config_from_json(const nlohmann::json& j, StitchConfig base = {});
nlohmann::json search_trace_json(const TokenSequence& edit, const PartitionResult& partition,
                                 const RepositoryBundle& repo);

}  // namespace phonosynth
