#include "phonosynth/bundle.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "phonosynth/errors.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

using nlohmann::json;

namespace {

// Field access with JSON-pointer style paths for error messages.
const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "/" + key, "missing field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected number");
  return j.get<double>();
}

std::string string_field(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_string()) throw SchemaError(path + "/" + key, "expected string");
  return v.get<std::string>();
}

void check_format(const json& j, const char* expected) {
  const std::string fmt = string_field(j, "format", "");
  if (fmt != expected) throw SchemaError("/format", "expected '" + std::string(expected) + "', got '" + fmt + "'");
}

json tokens_to_json(std::span<const Token> tokens) {
  json arr = json::array();
  for (const Token& t : tokens) arr.push_back({t.name, t.start_s, t.end_s});
  return arr;
}

std::vector<Token> tokens_from_json(const json& arr, const std::string& path, TokenKind kind) {
  if (!arr.is_array()) throw SchemaError(path, "expected array");
  std::vector<Token> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    const json& t = arr[i];
    if (!t.is_array() || t.size() != 3 || !t[0].is_string()) throw SchemaError(p, "expected [name, start_s, end_s]");
    out.push_back(Token{kind, t[0].get<std::string>(), number(t[1], p + "/1"), number(t[2], p + "/2")});
  }
  return out;
}

TokenSequence sequence_from_json(const json& arr, const std::string& path) {
  try {
    return TokenSequence(tokens_from_json(arr, path, TokenKind::phoneme));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

template <typename Rows>
json matrix_to_json(const Rows& rows) {
  using Row = typename Rows::value_type;
  const std::size_t cols = std::tuple_size_v<Row>;
  json data = json::array();
  for (const Row& r : rows) {
    for (float v : r) data.push_back(v);
  }
  return {{"shape", {rows.size(), cols}}, {"data", std::move(data)}};
}

template <std::size_t N>
std::vector<std::array<float, N>> matrix_from_json(const json& j, const std::string& path) {
  const json& shape = field(j, "shape", path);
  if (!shape.is_array() || shape.size() != 2) throw SchemaError(path + "/shape", "expected [rows, cols]");
  const auto rows = shape[0].get<std::size_t>();
  if (shape[1].get<std::size_t>() != N) throw SchemaError(path + "/shape", "expected " + std::to_string(N) + " columns");
  const json& data = field(j, "data", path);
  if (!data.is_array() || data.size() != rows * N) throw SchemaError(path + "/data", "length does not match shape");
  std::vector<std::array<float, N>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      const json& v = data[r * N + c];
      if (!v.is_number()) throw SchemaError(path + "/data/" + std::to_string(r * N + c), "expected number");
      out[r][c] = static_cast<float>(v.get<double>());
    }
  }
  return out;
}

template <std::size_t N>
json vector_to_json(const std::array<float, N>& v) {
  json arr = json::array();
  for (float x : v) arr.push_back(x);
  return arr;
}

template <std::size_t N>
std::array<float, N> vector_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != N) throw SchemaError(path, "expected " + std::to_string(N) + " numbers");
  std::array<float, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<float>(number(j[i], path + "/" + std::to_string(i)));
  return out;
}

void write_f32(const std::filesystem::path& path, const ExpressionTrack& track) {
  const std::string bytes = encode_track_f32(track);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<ExpressionFrame> read_f32(const std::filesystem::path& path, std::size_t rows, const std::string& jpath) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(jpath, "cannot open sidecar " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != rows * kExpressionDim * 4) throw SchemaError(jpath, "sidecar size does not match shape");
  std::vector<ExpressionFrame> frames(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < kExpressionDim; ++c) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, bytes.data() + (r * kExpressionDim + c) * 4, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      frames[r].values[c] = std::bit_cast<float>(bits);
    }
  }
  return frames;
}

json track_to_json(const ExpressionTrack& track, const std::filesystem::path& doc_path, const SaveOptions& options) {
  if (track.size() > options.sidecar_threshold_frames && !doc_path.empty()) {
    const std::string sidecar = doc_path.filename().string() + ".track.f32";
    write_f32(doc_path.parent_path() / sidecar, track);
    return {{"shape", {track.size(), kExpressionDim}}, {"sidecar", sidecar}};
  }
  std::vector<std::array<float, kExpressionDim>> rows;
  rows.reserve(track.size());
  for (const ExpressionFrame& f : track.frames) rows.push_back(f.values);
  return matrix_to_json(rows);
}

ExpressionTrack track_from_json(const json& j, double fps, const std::filesystem::path& base_dir,
                                const std::string& path) {
  ExpressionTrack track;
  track.fps = fps;
  if (j.contains("sidecar")) {
    const json& shape = field(j, "shape", path);
    if (!shape.is_array() || shape.size() != 2 || shape[1].get<std::size_t>() != kExpressionDim) {
      throw SchemaError(path + "/shape", "expected [rows, 64]");
    }
    track.frames = read_f32(base_dir / string_field(j, "sidecar", path), shape[0].get<std::size_t>(), path + "/sidecar");
  } else {
    for (const auto& row : matrix_from_json<kExpressionDim>(j, path)) track.frames.push_back(ExpressionFrame{row});
  }
  try {
    track.validate();
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
  return track;
}

double fps_from_json(const json& j) {
  const double fps = number(field(j, "fps", ""), "/fps");
  if (!(fps > 0.0)) throw SchemaError("/fps", "must be positive");
  return fps;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
}

void save_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << '\n';
}

json bundle_to_json_impl(const RepositoryBundle& b, const std::filesystem::path& doc_path, const SaveOptions& options) {
  json j;
  j["format"] = kBundleFormat;
  j["style"] = b.style;
  j["fps"] = b.track.fps;
  j["tokens"] = tokens_to_json(b.tokens.tokens());
  j["gestures"] = tokens_to_json(b.gestures);
  j["closed_mouth_exemplars"] = b.closed_mouth_exemplars;
  j["track"] = track_to_json(b.track, doc_path, options);
  if (b.preview_basis) {
    json data = json::array();
    for (float v : b.preview_basis->rows) data.push_back(v);
    j["preview_basis"] = {{"shape", {2 * kPreviewPoints, kExpressionDim}}, {"data", std::move(data)}};
  } else {
    j["preview_basis"] = nullptr;
  }
  return j;
}

}  // namespace

std::string encode_track_f32(const ExpressionTrack& track) {
  std::string bytes(track.size() * kExpressionDim * 4, '\0');
  std::size_t off = 0;
  for (const ExpressionFrame& f : track.frames) {
    for (float v : f.values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(bytes.data() + off, &bits, 4);
      off += 4;
    }
  }
  return bytes;
}

std::vector<std::array<float, 2>> PreviewBasis::outline(const ExpressionFrame& frame) const {
  std::vector<std::array<float, 2>> pts(kPreviewPoints);
  for (std::size_t r = 0; r < 2 * kPreviewPoints; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < kExpressionDim; ++c) {
      acc += static_cast<double>(rows[r * kExpressionDim + c]) * frame.values[c];
    }
    pts[r / 2][r % 2] = static_cast<float>(acc);
  }
  return pts;
}

void RepositoryBundle::validate() const {
  try {
    track.validate();
  } catch (const Error& e) {
    throw SchemaError("/track", e.what());
  }
  const double duration = track.duration_s();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].is_gesture()) throw SchemaError("/tokens/" + std::to_string(i), "gestures belong in /gestures");
    if (tokens[i].end_s > duration) {
      throw SchemaError("/tokens/" + std::to_string(i), "token ends after the track");
    }
  }
  for (std::size_t i = 0; i < gestures.size(); ++i) {
    const Token& g = gestures[i];
    const std::string p = "/gestures/" + std::to_string(i);
    if (canonical_gesture_name(g.name) != g.name) throw SchemaError(p, "unknown gesture '" + g.name + "'");
    if (!g.is_gesture()) throw SchemaError(p, "expected gesture token");
    if (!(g.end_s > g.start_s) || g.start_s < 0.0 || g.end_s > duration) {
      throw SchemaError(p, "gesture interval outside the track");
    }
  }
  for (std::size_t i = 0; i < closed_mouth_exemplars.size(); ++i) {
    if (closed_mouth_exemplars[i] >= track.size()) {
      throw SchemaError("/closed_mouth_exemplars/" + std::to_string(i),
                        "frame " + std::to_string(closed_mouth_exemplars[i]) + " out of range (" +
                            std::to_string(track.size()) + " frames)");
    }
  }
  if (preview_basis && preview_basis->rows.size() != 2 * kPreviewPoints * kExpressionDim) {
    throw SchemaError("/preview_basis", "expected 40x64 values");
  }
}

void TargetClip::validate() const {
  try {
    track.validate();
  } catch (const Error& e) {
    throw SchemaError("/track", e.what());
  }
  if (pose.size() != track.size()) throw SchemaError("/pose", "frame count differs from track");
  if (illumination.size() != track.size()) throw SchemaError("/illumination", "frame count differs from track");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].end_s > track.duration_s()) {
      throw SchemaError("/tokens/" + std::to_string(i), "token ends after the track");
    }
  }
}

nlohmann::json bundle_to_json(const RepositoryBundle& bundle) {
  return bundle_to_json_impl(bundle, {}, SaveOptions{});
}

RepositoryBundle bundle_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_format(j, kBundleFormat);
  RepositoryBundle b;
  b.style = string_field(j, "style", "");
  const double fps = fps_from_json(j);
  b.tokens = sequence_from_json(field(j, "tokens", ""), "/tokens");
  b.gestures = tokens_from_json(field(j, "gestures", ""), "/gestures", TokenKind::gesture);
  const json& ex = field(j, "closed_mouth_exemplars", "");
  if (!ex.is_array()) throw SchemaError("/closed_mouth_exemplars", "expected array");
  for (std::size_t i = 0; i < ex.size(); ++i) {
    if (!ex[i].is_number_unsigned()) {
      throw SchemaError("/closed_mouth_exemplars/" + std::to_string(i), "expected frame index");
    }
    b.closed_mouth_exemplars.push_back(ex[i].get<std::size_t>());
  }
  b.track = track_from_json(field(j, "track", ""), fps, base_dir, "/track");
  if (const auto it = j.find("preview_basis"); it != j.end() && !it->is_null()) {
    PreviewBasis basis;
    for (const auto& row : matrix_from_json<kExpressionDim>(*it, "/preview_basis")) {
      basis.rows.insert(basis.rows.end(), row.begin(), row.end());
    }
    b.preview_basis = std::move(basis);
  }
  b.validate();
  return b;
}

RepositoryBundle load_bundle(const std::filesystem::path& path, std::optional<double> expected_fps) {
  RepositoryBundle b = bundle_from_json(load_json(path), path.parent_path());
  if (expected_fps && *expected_fps != b.track.fps) {
    throw SchemaError("/fps", "fps mismatch: bundle has " + std::to_string(b.track.fps) + ", expected " +
                                  std::to_string(*expected_fps));
  }
  return b;
}

void save_bundle(const RepositoryBundle& bundle, const std::filesystem::path& path, const SaveOptions& options) {
  bundle.validate();
  save_json(bundle_to_json_impl(bundle, path, options), path);
}

TargetClip load_target(const std::filesystem::path& path) {
  const json j = load_json(path);
  check_format(j, kTargetFormat);
  TargetClip clip;
  const double fps = fps_from_json(j);
  clip.tokens = sequence_from_json(field(j, "tokens", ""), "/tokens");
  clip.track = track_from_json(field(j, "track", ""), fps, path.parent_path(), "/track");
  clip.pose = matrix_from_json<kPoseDim>(field(j, "pose", ""), "/pose");
  clip.illumination = matrix_from_json<kIlluminationDim>(field(j, "illumination", ""), "/illumination");
  clip.geometry = vector_from_json<kGeometryDim>(field(j, "geometry", ""), "/geometry");
  clip.reflectance = vector_from_json<kReflectanceDim>(field(j, "reflectance", ""), "/reflectance");
  clip.validate();
  return clip;
}

void save_target(const TargetClip& clip, const std::filesystem::path& path, const SaveOptions& options) {
  clip.validate();
  json j;
  j["format"] = kTargetFormat;
  j["fps"] = clip.track.fps;
  j["tokens"] = tokens_to_json(clip.tokens.tokens());
  j["track"] = track_to_json(clip.track, path, options);
  j["pose"] = matrix_to_json(clip.pose);
  j["illumination"] = matrix_to_json(clip.illumination);
  j["geometry"] = vector_to_json(clip.geometry);
  j["reflectance"] = vector_to_json(clip.reflectance);
  save_json(j, path);
}

}  // namespace phonosynth
