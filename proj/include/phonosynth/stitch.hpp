#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "phonosynth/bundle.hpp"
#include "phonosynth/expression.hpp"
#include "phonosynth/search.hpp"
#include "phonosynth/token.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

struct StitchConfig {
  double gaussian_sigma_frames = 1.0;
  int gaussian_radius_frames = 2;
  int closure_frames = 2;
  // Boundary b sits between segments b and b + 1.
  std::map<std::size_t, int> boundary_radius;
  // Keyed by edit token index.
  std::map<std::size_t, int> closure_override;

  void validate() const;

  friend bool operator==(const StitchConfig&, const StitchConfig&) = default;
};

// Output frame grid of an edit: frame j sits at origin_s + j / fps.
struct EditTimeline {
  double origin_s = 0.0;
  double fps = 30.0;
  std::size_t frame_count = 0;

  static EditTimeline of(const TokenSequence& edit, double fps);

  double time_of(std::size_t frame) const { return origin_s + static_cast<double>(frame) / fps; }
  // First frame index whose time is >= t (may be negative or >= frame_count).
  std::ptrdiff_t first_frame_at(double t) const;
};

// Retimed repository content for one segment on the output frame grid.
struct Fragment {
  std::size_t segment = 0;
  std::ptrdiff_t first_frame = 0;           // output index of values[0]
  std::vector<ExpressionVector> values;
  std::vector<double> source_times;         // repository time sampled per frame

  std::ptrdiff_t end_frame() const { return first_frame + static_cast<std::ptrdiff_t>(values.size()); }
  bool covers(std::ptrdiff_t frame) const { return frame >= first_frame && frame < end_frame(); }
  const ExpressionVector& at(std::ptrdiff_t frame) const {
    return values[static_cast<std::size_t>(frame - first_frame)];
  }
};

struct FrameProvenance {
  std::size_t segment = 0;
  double source_time_s = 0.0;

  friend bool operator==(const FrameProvenance&, const FrameProvenance&) = default;
};

struct ClosureInsertion {
  std::size_t token_index = 0;
  std::string phoneme;
  std::size_t exemplar = 0;        // index into repo.closed_mouth_exemplars
  std::size_t first_frame = 0;
  std::size_t frames = 0;

  friend bool operator==(const ClosureInsertion&, const ClosureInsertion&) = default;
};

struct StitchTrace {
  std::size_t frame_count = 0;
  std::vector<FrameProvenance> provenance;
  std::vector<std::size_t> boundaries;   // first output frame of each later segment's core
  std::vector<int> boundary_radius;      // radius applied at each boundary
  std::vector<ClosureInsertion> closures;

  friend bool operator==(const StitchTrace&, const StitchTrace&) = default;
};

struct StitchResult {
  ExpressionTrack track;
  StitchTrace trace;
};

// Maps each expanded query token's edit interval linearly onto its matched
// repository interval and samples the repository track on the output grid.
// Gaps between tokens map onto the corresponding repository gaps.
Fragment retime_segment(const SegmentMatch& match, std::size_t segment_index, const TokenSequence& edit,
                        const SearchContext& ctx, const RepositoryBundle& repo, const EditTimeline& timeline);

// Crossfades adjacent fragments over their two shared context tokens, then
// Gaussian-smooths every channel within the boundary radius of each segment
// boundary. Throws Error when adjacent fragments fail to overlap.
StitchResult blend_and_smooth(const std::vector<Fragment>& fragments, const PartitionResult& partition,
                              const TokenSequence& edit, const EditTimeline& timeline, const StitchConfig& cfg);

// Smoothing stage alone: returns `track` with frames near `boundaries`
// replaced by normalized Gaussian averages; `radii` gives the radius per
// boundary.
ExpressionTrack smooth_boundaries(const ExpressionTrack& track, const std::vector<std::size_t>& boundaries,
                                  const std::vector<int>& radii, const StitchConfig& cfg);

// Blends the nearest closed-mouth exemplar into the first frames of every
// M/B/P phoneme, weight 1 at the onset ramping down over the closure length.
// Throws Error when a closure is needed and the repository has no exemplars.
std::vector<ClosureInsertion> force_closures(ExpressionTrack& track, const TokenSequence& edit,
                                             const RepositoryBundle& repo, const VisemeTable& table,
                                             const EditTimeline& timeline, const StitchConfig& cfg);

// retime_segment for every segment, blend_and_smooth, force_closures.
StitchResult stitch(const PartitionResult& partition, const TokenSequence& edit, const SearchContext& ctx,
                    const RepositoryBundle& repo, const VisemeTable& table, const StitchConfig& cfg);

}  // namespace phonosynth
