#include "phonosynth/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "phonosynth/correspondence.hpp"
#include "phonosynth/errors.hpp"
#include "phonosynth/hash.hpp"

namespace phonosynth {

using json = nlohmann::json;

std::shared_ptr<const StyleRepository> StyleRepository::make(RepositoryBundle bundle, const VisemeTable& table) {
  auto repo = std::make_shared<StyleRepository>();
  repo->index = build_index(bundle, table);
  repo->bundle = std::move(bundle);
  return repo;
}

const StyleRepository& EngineContext::style(const std::string& name) const {
  const auto it = styles.find(name);
  if (it == styles.end() || !it->second) throw NotFoundError("unknown repository style '" + name + "'");
  return *it->second;
}

StitchConfig apply_overrides(StitchConfig base, const StitchOverrides& overrides) {
  for (const auto& [b, r] : overrides.boundary_radius) base.boundary_radius[b] = r;
  for (const auto& [i, k] : overrides.closure_frames) base.closure_override[i] = k;
  return base;
}

namespace {

EditLocation resolve(const TargetClip& target, const std::optional<EditLocation>& location) {
  const std::size_t n = target.tokens.size();
  const EditLocation loc = location.value_or(EditLocation{n, n});
  if (loc.begin > loc.end || loc.end > n) {
    throw InvalidEditError("edit location [" + std::to_string(loc.begin) + ", " + std::to_string(loc.end) +
                           ") lies outside the " + std::to_string(n) + "-token transcript");
  }
  return loc;
}

json location_json(const std::optional<EditLocation>& loc) {
  if (!loc) return nullptr;
  return {{"begin", loc->begin}, {"end", loc->end}};
}

SynthesisResult finish(const EngineContext& ctx, SynthesisRequest request, SearchContext sc, PartitionResult partition) {
  const StyleRepository& repo = ctx.style(request.style);
  SynthesisResult r;
  r.model_checksum = ctx.model->checksum();
  r.id = result_id(request, r.model_checksum);
  StitchResult st = stitch(partition, request.edit.tokens, sc, repo.bundle, ctx.table, request.stitch);
  r.stitched = std::move(st.track);
  r.trace = std::move(st.trace);
  r.track = infer(*ctx.model, r.stitched);
  r.full = expand_to_full(ctx.target, r.track, request.location);
  r.request = std::move(request);
  r.context = std::move(sc);
  r.partition = std::move(partition);
  return r;
}

}  // namespace

SearchContext context_for(const TargetClip& target, const TokenSequence& edit,
                          const std::optional<EditLocation>& location) {
  const EditLocation loc = resolve(target, location);
  SearchContext sc;
  if (edit.empty()) return sc;
  if (loc.begin > 0) {
    const Token& t = target.tokens[loc.begin - 1];
    sc.left = Token{t.kind, t.name, edit.start_s() - t.duration(), edit.start_s()};
  }
  if (loc.end < target.tokens.size()) {
    const Token& t = target.tokens[loc.end];
    sc.right = Token{t.kind, t.name, edit.end_s(), edit.end_s() + t.duration()};
  }
  return sc;
}

std::pair<double, double> expansion_interval(const TargetClip& target, double edit_duration_s,
                                             const std::optional<EditLocation>& location) {
  const EditLocation loc = resolve(target, location);
  const double clip = target.track.duration_s();
  const auto& toks = target.tokens;
  if (loc.begin < loc.end) return {toks[loc.begin].start_s, toks[loc.end - 1].end_s};

  double center = clip;
  if (!toks.empty()) {
    if (loc.begin == 0) {
      center = toks[0].start_s;
    } else if (loc.begin == toks.size()) {
      center = location ? toks.back().end_s : clip;
    } else {
      center = 0.5 * (toks[loc.begin - 1].end_s + toks[loc.begin].start_s);
    }
  }
  if (edit_duration_s >= clip) return {0.0, clip};
  double a = center - 0.5 * edit_duration_s;
  a = std::clamp(a, 0.0, clip - edit_duration_s);
  return {a, a + edit_duration_s};
}

std::vector<FullFaceFrame> expand_to_full(const TargetClip& target, const ExpressionTrack& track,
                                          const std::optional<EditLocation>& location) {
  if (target.pose.size() != target.track.size() || target.illumination.size() != target.track.size()) {
    throw ShapeError("target pose/illumination tracks do not match its expression track");
  }
  if (target.track.empty()) throw InvalidEditError("target clip has no frames");
  const auto [a, b] = expansion_interval(target, track.duration_s(), location);
  const std::size_t n = track.size();
  std::vector<FullFaceFrame> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = a + static_cast<double>(j) * (b - a) / static_cast<double>(n);
    const double pos = t * target.track.fps;
    FullFaceFrame& f = out[j];
    f.geometry = target.geometry;
    f.reflectance = target.reflectance;
    f.pose = sample_rows(target.pose, pos);
    f.illumination = sample_rows(target.illumination, pos);
    f.expression = track.frames[j];
  }
  return out;
}

std::string result_id(const SynthesisRequest& request, std::uint64_t model_checksum) {
  const json canon = {{"edit", to_json(request.edit)},
                      {"style", request.style},
                      {"cost", to_json(request.cost)},
                      {"stitch", to_json(request.stitch)},
                      {"location", location_json(request.location)},
                      {"model", hex64(model_checksum)}};
  return hex64(fnv1a64(canon.dump()));
}

SynthesisResult synthesize(const EngineContext& ctx, const SynthesisRequest& request) {
  if (!ctx.model) throw Error("no retargeting model: train or load one first");
  if (request.edit.tokens.empty()) throw InvalidEditError("empty edit");
  request.cost.validate();
  request.stitch.validate();
  const StyleRepository& repo = ctx.style(request.style);
  SearchContext sc = context_for(ctx.target, request.edit.tokens, request.location);
  PartitionResult partition =
      optimal_partition(request.edit.tokens, sc, repo.bundle, repo.index, ctx.table, request.cost);
  return finish(ctx, request, std::move(sc), std::move(partition));
}

SynthesisResult refine(const EngineContext& ctx, const SynthesisResult& parent, const StitchOverrides& overrides) {
  if (!ctx.model) throw Error("no retargeting model: train or load one first");
  const TokenSequence& edit = parent.request.edit.tokens;
  for (const auto& [b, r] : overrides.boundary_radius) {
    if (b >= parent.trace.boundaries.size()) {
      throw InvalidEditError("unknown boundary " + std::to_string(b) + " (result has " +
                             std::to_string(parent.trace.boundaries.size()) + ")");
    }
    if (r < 0) throw InvalidEditError("boundary radius must be >= 0");
  }
  for (const auto& [i, k] : overrides.closure_frames) {
    if (i >= edit.size() || edit[i].is_gesture() || !ctx.table.is_closure(edit[i].name)) {
      throw InvalidEditError("edit token " + std::to_string(i) + " is not an M/B/P phoneme");
    }
    if (k < 0) throw InvalidEditError("closure length must be >= 0");
  }
  SynthesisRequest request = parent.request;
  request.stitch = apply_overrides(request.stitch, overrides);
  SynthesisResult r = finish(ctx, std::move(request), parent.context, parent.partition);
  if (r.id != parent.id) r.parent = parent.id;
  return r;
}

TrainResult train_retargeting(const RepositoryBundle& neutral, const TargetClip& target, const VisemeTable& table,
                              const ModelConfig& model, const TrainConfig& train_cfg, const CostConfig& cost) {
  const CorrespondenceSet corr = build_correspondences(neutral, target.tokens, target.track, table, cost);
  if (training_windows(corr.pairs, model.window).empty()) {
    throw TrainingError("no correspondence pair is long enough for a " + std::to_string(model.window) +
                        "-frame window; is the target clip too short?");
  }
  return train(corr.pairs, RetargetModel::initialize(model), train_cfg);
}

json to_json(const SegmentMatch& s) {
  return {{"core", {s.core_begin, s.core_end}},
          {"left_context", s.left_context},
          {"right_context", s.right_context},
          {"gesture", s.gesture},
          {"repo", {s.repo_begin, s.repo_end}},
          {"match_cost", s.match_cost},
          {"length_cost", s.length_cost},
          {"candidates", s.candidate_count}};
}

json to_json(const PartitionResult& p) {
  json segs = json::array();
  for (const auto& s : p.segments) segs.push_back(to_json(s));
  return {{"total_cost", p.total_cost}, {"segments", std::move(segs)}};
}

json to_json(const StitchTrace& t, bool with_provenance) {
  json closures = json::array();
  for (const auto& c : t.closures) {
    closures.push_back({{"token", c.token_index},
                        {"phoneme", c.phoneme},
                        {"exemplar", c.exemplar},
                        {"first_frame", c.first_frame},
                        {"frames", c.frames}});
  }
  json j = {{"frame_count", t.frame_count},
            {"boundaries", t.boundaries},
            {"boundary_radius", t.boundary_radius},
            {"closures", std::move(closures)}};
  if (with_provenance) {
    json prov = json::array();
    for (const auto& p : t.provenance) prov.push_back({p.segment, p.source_time_s});
    j["provenance"] = std::move(prov);
  }
  return j;
}

json to_json(const CostConfig& c) {
  return {{"c_phoneme", c.c_phoneme},
          {"c_viseme", c.c_viseme},
          {"c_time", c.c_time},
          {"kappa_len", c.kappa_len},
          {"max_segment_len", c.max_segment_len}};
}

namespace {

json int_map_json(const std::map<std::size_t, int>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

std::map<std::size_t, int> int_map_from_json(const json& j, const std::string& path) {
  std::map<std::size_t, int> m;
  if (j.is_null()) return m;
  if (!j.is_object()) throw SchemaError(path, "expected an object of index -> frames");
  for (const auto& [k, v] : j.items()) {
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      const long long parsed = std::stoll(k, &used);
      if (used != k.size() || parsed < 0) throw std::invalid_argument(k);
      idx = static_cast<std::size_t>(parsed);
    } catch (const std::exception&) {
      throw SchemaError(path + "/" + k, "key must be a non-negative index");
    }
    if (!v.is_number_integer()) throw SchemaError(path + "/" + k, "expected an integer frame count");
    const long long frames = v.get<long long>();
    if (frames < 0 || frames > 1000) throw SchemaError(path + "/" + k, "frame count out of range");
    m[idx] = static_cast<int>(frames);
  }
  return m;
}

template <typename T>
void maybe(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw SchemaError(path + "/" + key, "expected an integer");
  } else {
    if (!v.is_number()) throw SchemaError(path + "/" + key, "expected a number");
  }
  out = v.get<T>();
}

}  // namespace

json to_json(const StitchConfig& c) {
  return {{"gaussian_sigma_frames", c.gaussian_sigma_frames},
          {"gaussian_radius_frames", c.gaussian_radius_frames},
          {"closure_frames", c.closure_frames},
          {"boundary_radius", int_map_json(c.boundary_radius)},
          {"closure_override", int_map_json(c.closure_override)}};
}

json to_json(const StitchOverrides& o) {
  return {{"boundary_radius", int_map_json(o.boundary_radius)}, {"closure_frames", int_map_json(o.closure_frames)}};
}

StitchOverrides stitch_overrides_from_json(const json& j) {
  StitchOverrides o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw SchemaError("/overrides", "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "boundary_radius") {
      o.boundary_radius = int_map_from_json(v, "/overrides/boundary_radius");
    } else if (k == "closure_frames") {
      o.closure_frames = int_map_from_json(v, "/overrides/closure_frames");
    } else {
      throw SchemaError("/overrides/" + k, "unknown key");
    }
  }
  return o;
}

CostConfig cost_config_from_json(const json& j, CostConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) throw SchemaError("/cost", "expected an object");
  maybe(j, "c_phoneme", c.c_phoneme, "/cost");
  maybe(j, "c_viseme", c.c_viseme, "/cost");
  maybe(j, "c_time", c.c_time, "/cost");
  maybe(j, "kappa_len", c.kappa_len, "/cost");
  maybe(j, "max_segment_len", c.max_segment_len, "/cost");
  return c;
}

StitchConfig stitch_config_from_json(const json& j, StitchConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) throw SchemaError("/stitch", "expected an object");
  maybe(j, "gaussian_sigma_frames", c.gaussian_sigma_frames, "/stitch");
  maybe(j, "gaussian_radius_frames", c.gaussian_radius_frames, "/stitch");
  maybe(j, "closure_frames", c.closure_frames, "/stitch");
  if (j.contains("boundary_radius")) c.boundary_radius = int_map_from_json(j.at("boundary_radius"), "/stitch/boundary_radius");
  if (j.contains("closure_override")) c.closure_override = int_map_from_json(j.at("closure_override"), "/stitch/closure_override");
  return c;
}

json search_trace_json(const TokenSequence& edit, const PartitionResult& partition, const RepositoryBundle& repo) {
  auto names = [](auto first, auto last) {
    json a = json::array();
    for (auto it = first; it != last; ++it) a.push_back(it->name);
    return a;
  };
  json segs = json::array();
  for (const auto& s : partition.segments) {
    json j = to_json(s);
    j["core_tokens"] = names(edit.begin() + static_cast<std::ptrdiff_t>(s.core_begin),
                             edit.begin() + static_cast<std::ptrdiff_t>(s.core_end));
    if (s.gesture) {
      const Token& g = repo.gestures.at(s.repo_begin);
      j["repo_tokens"] = json::array({g.name});
      j["repo_time"] = {g.start_s, g.end_s};
    } else {
      const auto first = repo.tokens.begin() + static_cast<std::ptrdiff_t>(s.repo_begin);
      const auto last = repo.tokens.begin() + static_cast<std::ptrdiff_t>(s.repo_end);
      j["repo_tokens"] = names(first, last);
      j["repo_time"] = {first->start_s, (last - 1)->end_s};
    }
    segs.push_back(std::move(j));
  }
  json toks = json::array();
  for (const Token& t : edit) toks.push_back({to_string(t.kind), t.name, t.start_s, t.end_s});
  return {{"edit", std::move(toks)}, {"total_cost", partition.total_cost}, {"segments", std::move(segs)}};
}

}  // namespace phonosynth
