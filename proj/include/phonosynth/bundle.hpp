#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phonosynth/expression.hpp"
#include "phonosynth/token.hpp"

namespace phonosynth {

inline constexpr const char* kBundleFormat = "phonosynth-bundle/1";
inline constexpr const char* kTargetFormat = "phonosynth-target/1";

inline constexpr std::size_t kPreviewPoints = 20;

// Row-major (2 * kPreviewPoints) x 64 map from expression coefficients to a
// mouth outline, used only for visualization.
struct PreviewBasis {
  std::vector<float> rows;  // 40 * 64 values

  // Returns 20 (x, y) pairs.
  std::vector<std::array<float, 2>> outline(const ExpressionFrame& frame) const;

  friend bool operator==(const PreviewBasis&, const PreviewBasis&) = default;
};

// Annotated source-actor recording searched for lip motion.
struct RepositoryBundle {
  std::string style = "neutral";
  TokenSequence tokens;                      // phonemes only
  ExpressionTrack track;
  std::vector<std::size_t> closed_mouth_exemplars;  // frame indices
  std::vector<Token> gestures;               // gesture annotations, repository time
  std::optional<PreviewBasis> preview_basis;

  // Throws SchemaError on invariant violations.
  void validate() const;

  friend bool operator==(const RepositoryBundle&, const RepositoryBundle&) = default;
};

// The clip being edited.
struct TargetClip {
  TokenSequence tokens;
  ExpressionTrack track;
  std::vector<std::array<float, kPoseDim>> pose;
  std::vector<std::array<float, kIlluminationDim>> illumination;
  std::array<float, kGeometryDim> geometry{};
  std::array<float, kReflectanceDim> reflectance{};

  void validate() const;

  friend bool operator==(const TargetClip&, const TargetClip&) = default;
};

struct SaveOptions {
  // Tracks with more frames than this go to a little-endian f32 sidecar file
  // next to the JSON document.
  std::size_t sidecar_threshold_frames = 20000;
};

// Throws SchemaError (with a field path) for malformed documents and when
// `expected_fps` is given and differs from the bundle's fps.
RepositoryBundle load_bundle(const std::filesystem::path& path,
                             std::optional<double> expected_fps = std::nullopt);
void save_bundle(const RepositoryBundle& bundle, const std::filesystem::path& path,
                 const SaveOptions& options = {});

TargetClip load_target(const std::filesystem::path& path);
void save_target(const TargetClip& clip, const std::filesystem::path& path,
                 const SaveOptions& options = {});

// In-memory forms; sidecar references are resolved against `base_dir`.
RepositoryBundle bundle_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json bundle_to_json(const RepositoryBundle& bundle);

// Little-endian f32 encoding of a track's frames, row-major.
std::string encode_track_f32(const ExpressionTrack& track);

}  // namespace phonosynth
