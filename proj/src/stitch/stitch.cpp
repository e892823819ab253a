#include "phonosynth/stitch.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "phonosynth/errors.hpp"

namespace phonosynth {

void StitchConfig::validate() const {
  if (!(gaussian_sigma_frames > 0.0)) throw Error("gaussian_sigma_frames must be positive");
  if (gaussian_radius_frames < 0) throw Error("gaussian_radius_frames must be >= 0");
  if (closure_frames < 0) throw Error("closure_frames must be >= 0");
  for (const auto& [b, r] : boundary_radius) {
    if (r < 0) throw Error("boundary radius override must be >= 0");
  }
  for (const auto& [t, k] : closure_override) {
    if (k < 0) throw Error("closure override must be >= 0");
  }
}

EditTimeline EditTimeline::of(const TokenSequence& edit, double fps) {
  if (!(fps > 0.0)) throw Error("fps must be positive");
  EditTimeline tl;
  tl.fps = fps;
  tl.origin_s = edit.start_s();
  tl.frame_count = static_cast<std::size_t>(std::lround((edit.end_s() - edit.start_s()) * fps));
  return tl;
}

std::ptrdiff_t EditTimeline::first_frame_at(double t) const {
  const double pos = detail::snap_frame_position((t - origin_s) * fps);
  return static_cast<std::ptrdiff_t>(std::ceil(pos));
}

Fragment retime_segment(const SegmentMatch& match, std::size_t segment_index, const TokenSequence& edit,
                        const SearchContext& ctx, const RepositoryBundle& repo, const EditTimeline& timeline) {
  const std::vector<Token> query = expanded_query(edit, ctx, match.core_begin, match.core_end);
  std::vector<Token> source;
  if (match.gesture) {
    source.push_back(repo.gestures.at(match.repo_begin));
  } else {
    for (std::size_t p = match.repo_begin; p < match.repo_end; ++p) source.push_back(repo.tokens[p]);
  }
  if (source.size() != query.size()) {
    throw ShapeError("segment query has " + std::to_string(query.size()) + " tokens but match has " +
                     std::to_string(source.size()));
  }
  for (const Token& q : query) {
    if (!(q.duration() > 0.0)) throw Error("zero-duration edit token '" + q.name + "'");
  }

  // Room after the last matched token before the repository moves on.
  double source_tail = repo.track.duration_s() - source.back().end_s;
  if (!match.gesture && match.repo_end < repo.tokens.size()) {
    source_tail = repo.tokens[match.repo_end].start_s - source.back().end_s;
  }
  source_tail = std::max(source_tail, 0.0);

  // The fragment runs to the next edit token after the query, so silence
  // before a non-overlapping neighbour is covered.
  double span_end = query.back().end_s;
  const std::size_t after = match.core_end + (match.right_context ? 1 : 0);
  if (after < edit.size()) span_end = std::max(span_end, edit[after].start_s);

  auto source_time = [&](double t) {
    for (std::size_t k = 0; k < query.size(); ++k) {
      const Token& q = query[k];
      const Token& v = source[k];
      if (t < q.end_s || (k + 1 == query.size() && t <= q.end_s)) {
        if (t < q.start_s) {
          // Gap before token k; only reachable for k > 0.
          const Token& qp = query[k - 1];
          const Token& vp = source[k - 1];
          const double frac = (t - qp.end_s) / (q.start_s - qp.end_s);
          return vp.end_s + frac * (v.start_s - vp.end_s);
        }
        return v.start_s + (t - q.start_s) * (v.duration() / q.duration());
      }
    }
    return source.back().end_s + std::min(t - query.back().end_s, source_tail);
  };

  Fragment frag;
  frag.segment = segment_index;
  frag.first_frame = timeline.first_frame_at(query.front().start_s);
  const std::ptrdiff_t end_frame = timeline.first_frame_at(span_end);
  for (std::ptrdiff_t j = frag.first_frame; j < end_frame; ++j) {
    const double t = timeline.origin_s + static_cast<double>(j) / timeline.fps;
    const double tau = source_time(t);
    frag.source_times.push_back(tau);
    frag.values.push_back(repo.track.sample(tau));
  }
  return frag;
}

namespace {

bool overlaps_previous(const PartitionResult& partition, std::size_t s) {
  const SegmentMatch& prev = partition.segments[s - 1];
  const SegmentMatch& cur = partition.segments[s];
  return !prev.gesture && !cur.gesture && prev.right_context && cur.left_context;
}

std::vector<double> gaussian_kernel(int radius, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  return k;
}

}  // namespace

ExpressionTrack smooth_boundaries(const ExpressionTrack& track, const std::vector<std::size_t>& boundaries,
                                  const std::vector<int>& radii, const StitchConfig& cfg) {
  if (boundaries.size() != radii.size()) throw ShapeError("one radius per boundary required");
  const auto n = static_cast<std::ptrdiff_t>(track.size());

  // Effective radius per frame: the widest window that reaches it.
  std::vector<int> radius_at(track.size(), 0);
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    const int r = radii[b];
    const auto center = static_cast<std::ptrdiff_t>(boundaries[b]);
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, center - r); j <= std::min(n - 1, center + r); ++j) {
      radius_at[static_cast<std::size_t>(j)] = std::max(radius_at[static_cast<std::size_t>(j)], r);
    }
  }

  ExpressionTrack out = track;
  std::map<int, std::vector<double>> kernels;
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    const int r = radius_at[static_cast<std::size_t>(j)];
    if (r == 0) continue;
    // Wider user-set radii widen the kernel proportionally.
    const double sigma = cfg.gaussian_radius_frames > 0
                             ? cfg.gaussian_sigma_frames * static_cast<double>(r) / cfg.gaussian_radius_frames
                             : cfg.gaussian_sigma_frames;
    auto it = kernels.find(r);
    if (it == kernels.end()) it = kernels.emplace(r, gaussian_kernel(r, sigma)).first;
    const std::vector<double>& kernel = it->second;

    ExpressionVector acc{};
    double weight = 0.0;
    for (int k = -r; k <= r; ++k) {
      const std::ptrdiff_t src = j + k;
      if (src < 0 || src >= n) continue;
      const double g = kernel[static_cast<std::size_t>(k + r)];
      weight += g;
      const ExpressionFrame& f = track.frames[static_cast<std::size_t>(src)];
      for (std::size_t c = 0; c < kExpressionDim; ++c) acc[c] += g * static_cast<double>(f.values[c]);
    }
    for (std::size_t c = 0; c < kExpressionDim; ++c) acc[c] /= weight;
    out.frames[static_cast<std::size_t>(j)] = ExpressionFrame::from(acc);
  }
  return out;
}

StitchResult blend_and_smooth(const std::vector<Fragment>& fragments, const PartitionResult& partition,
                              const TokenSequence& edit, const EditTimeline& timeline, const StitchConfig& cfg) {
  cfg.validate();
  if (fragments.size() != partition.segments.size()) throw ShapeError("one fragment per segment required");
  const auto n = static_cast<std::ptrdiff_t>(timeline.frame_count);

  std::vector<std::optional<ExpressionVector>> acc(timeline.frame_count);
  std::vector<FrameProvenance> prov(timeline.frame_count);

  auto write = [&](const Fragment& f, std::ptrdiff_t from) {
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(from, 0); j < std::min(f.end_frame(), n); ++j) {
      if (!f.covers(j)) continue;
      acc[static_cast<std::size_t>(j)] = f.at(j);
      prov[static_cast<std::size_t>(j)] = {f.segment, f.source_times[static_cast<std::size_t>(j - f.first_frame)]};
    }
  };

  StitchTrace trace;
  trace.frame_count = timeline.frame_count;

  for (std::size_t s = 0; s < fragments.size(); ++s) {
    const Fragment& f = fragments[s];
    const SegmentMatch& seg = partition.segments[s];
    if (s == 0) {
      write(f, f.first_frame);
      continue;
    }
    const std::ptrdiff_t boundary = timeline.first_frame_at(edit[seg.core_begin].start_s);
    trace.boundaries.push_back(static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(boundary, 0, n)));

    if (!overlaps_previous(partition, s)) {
      write(f, boundary);
      continue;
    }
    // Shared context tokens: last core token of s-1 and first core token of s.
    const Token& a = edit[seg.core_begin - 1];
    const Token& b = edit[seg.core_begin];
    const std::ptrdiff_t o0 = std::max<std::ptrdiff_t>(timeline.first_frame_at(a.start_s), 0);
    const std::ptrdiff_t o1 = std::min(timeline.first_frame_at(b.end_s), n);  // exclusive
    const Fragment& prev = fragments[s - 1];
    for (std::ptrdiff_t j = o0; j < o1; ++j) {
      if (!f.covers(j) || !prev.covers(j) || !acc[static_cast<std::size_t>(j)]) {
        throw Error("fragments " + std::to_string(s - 1) + " and " + std::to_string(s) +
                    " do not overlap at frame " + std::to_string(j));
      }
    }
    const std::ptrdiff_t count = o1 - o0;
    for (std::ptrdiff_t j = o0; j < o1; ++j) {
      const double w = count > 1 ? static_cast<double>(j - o0) / static_cast<double>(count - 1) : 0.5;
      ExpressionVector& dst = *acc[static_cast<std::size_t>(j)];
      const ExpressionVector& src = f.at(j);
      for (std::size_t c = 0; c < kExpressionDim; ++c) dst[c] = (1.0 - w) * dst[c] + w * src[c];
      if (w >= 0.5) {
        prov[static_cast<std::size_t>(j)] = {f.segment, f.source_times[static_cast<std::size_t>(j - f.first_frame)]};
      }
    }
    write(f, o1);
  }

  ExpressionTrack blended;
  blended.fps = timeline.fps;
  blended.frames.reserve(timeline.frame_count);
  for (std::size_t j = 0; j < acc.size(); ++j) {
    if (!acc[j]) throw Error("output frame " + std::to_string(j) + " is not covered by any fragment");
    blended.frames.push_back(ExpressionFrame::from(*acc[j]));
  }

  for (std::size_t b = 0; b < trace.boundaries.size(); ++b) {
    const auto it = cfg.boundary_radius.find(b);
    trace.boundary_radius.push_back(it != cfg.boundary_radius.end() ? it->second : cfg.gaussian_radius_frames);
  }
  StitchResult result;
  result.track = smooth_boundaries(blended, trace.boundaries, trace.boundary_radius, cfg);
  trace.provenance = std::move(prov);
  result.trace = std::move(trace);
  return result;
}

std::vector<ClosureInsertion> force_closures(ExpressionTrack& track, const TokenSequence& edit,
                                             const RepositoryBundle& repo, const VisemeTable& table,
                                             const EditTimeline& timeline, const StitchConfig& cfg) {
  cfg.validate();
  const ExpressionTrack before = track;
  std::vector<ClosureInsertion> inserted;
  const auto n = static_cast<std::ptrdiff_t>(track.size());

  for (std::size_t i = 0; i < edit.size(); ++i) {
    const Token& t = edit[i];
    if (t.is_gesture() || !table.is_closure(t.name)) continue;
    const auto ov = cfg.closure_override.find(i);
    const int k = ov != cfg.closure_override.end() ? ov->second : cfg.closure_frames;
    if (k == 0) continue;
    const std::ptrdiff_t onset = timeline.first_frame_at(t.start_s);
    if (onset < 0 || onset >= n) continue;
    if (repo.closed_mouth_exemplars.empty()) {
      throw Error("closure needed for '" + t.name + "' but the repository has no closed-mouth exemplars");
    }

    const ExpressionVector at = before.frames[static_cast<std::size_t>(onset)].to_vector();
    std::size_t chosen = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < repo.closed_mouth_exemplars.size(); ++e) {
      const double d = squared_distance(repo.track.frames[repo.closed_mouth_exemplars[e]], at);
      if (d < best) {
        best = d;
        chosen = e;
      }
    }
    const ExpressionFrame& exemplar = repo.track.frames[repo.closed_mouth_exemplars[chosen]];

    ClosureInsertion ins{i, t.name, chosen, static_cast<std::size_t>(onset), 0};
    for (int q = 0; q < k && onset + q < n; ++q) {
      const double w = 1.0 - static_cast<double>(q) / static_cast<double>(k);
      ExpressionFrame& f = track.frames[static_cast<std::size_t>(onset + q)];
      for (std::size_t c = 0; c < kExpressionDim; ++c) {
        f.values[c] = static_cast<float>((1.0 - w) * static_cast<double>(f.values[c]) +
                                         w * static_cast<double>(exemplar.values[c]));
      }
      ++ins.frames;
    }
    inserted.push_back(std::move(ins));
  }
  return inserted;
}

StitchResult stitch(const PartitionResult& partition, const TokenSequence& edit, const SearchContext& ctx,
                    const RepositoryBundle& repo, const VisemeTable& table, const StitchConfig& cfg) {
  const EditTimeline timeline = EditTimeline::of(edit, repo.track.fps);
  std::vector<Fragment> fragments;
  fragments.reserve(partition.segments.size());
  for (std::size_t s = 0; s < partition.segments.size(); ++s) {
    fragments.push_back(retime_segment(partition.segments[s], s, edit, ctx, repo, timeline));
  }
  StitchResult result = blend_and_smooth(fragments, partition, edit, timeline, cfg);
  result.trace.closures = force_closures(result.track, edit, repo, table, timeline, cfg);
  return result;
}

}  // namespace phonosynth
