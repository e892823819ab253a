#include "phonosynth/session.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phonosynth/alignment.hpp"
#include "phonosynth/errors.hpp"
#include "phonosynth/hash.hpp"

namespace phonosynth {

using json = nlohmann::json;
namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_bytes(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), e.what());
  }
}

json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"decay_rate", t.decay_rate}, {"decay_period", t.decay_period},
          {"clip_norm", t.clip_norm},         {"batch_size", t.batch_size}, {"max_epochs", t.max_epochs},
          {"lambda", t.lambda},               {"seed", t.seed},             {"beta1", t.beta1},
          {"beta2", t.beta2},                 {"epsilon", t.epsilon}};
}

json model_json(const ModelConfig& m) {
  return {{"hidden", m.hidden},
          {"history", m.history},
          {"window", m.window},
          {"dropout", m.dropout.rate},
          {"seed", m.seed},
          {"output_init_scale", m.output_init_scale}};
}

template <typename T>
void field(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const bool ok = std::is_integral_v<T> ? v.is_number_integer() : v.is_number();
  if (!ok) throw SchemaError(path + "/" + key, "wrong value type");
  if constexpr (std::is_unsigned_v<T>) {
    if (v.get<long long>() < 0) throw SchemaError(path + "/" + key, "must be non-negative");
  }
  out = v.get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "/" : path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
      throw SchemaError(path + "/" + k, "unknown key");
    }
  }
}

TrainConfig train_from_json(const json& j, TrainConfig t) {
  if (j.is_null()) return t;
  check_keys(j,
             {"learning_rate", "decay_rate", "decay_period", "clip_norm", "batch_size", "max_epochs", "epochs",
              "lambda", "seed", "beta1", "beta2", "epsilon", "hidden"},
             "/train");
  field(j, "learning_rate", t.learning_rate, "/train");
  field(j, "decay_rate", t.decay_rate, "/train");
  field(j, "decay_period", t.decay_period, "/train");
  field(j, "clip_norm", t.clip_norm, "/train");
  field(j, "batch_size", t.batch_size, "/train");
  field(j, "max_epochs", t.max_epochs, "/train");
  field(j, "epochs", t.max_epochs, "/train");
  field(j, "lambda", t.lambda, "/train");
  field(j, "seed", t.seed, "/train");
  field(j, "beta1", t.beta1, "/train");
  field(j, "beta2", t.beta2, "/train");
  field(j, "epsilon", t.epsilon, "/train");
  return t;
}

ModelConfig model_from_json(const json& j, ModelConfig m) {
  if (j.is_null()) return m;
  check_keys(j, {"hidden", "history", "window", "dropout", "seed", "output_init_scale"}, "/model");
  field(j, "hidden", m.hidden, "/model");
  field(j, "history", m.history, "/model");
  field(j, "window", m.window, "/model");
  field(j, "seed", m.seed, "/model");
  field(j, "output_init_scale", m.output_init_scale, "/model");
  if (j.contains("dropout")) {
    const json& d = j.at("dropout");
    if (!d.is_array() || d.size() != 3) throw SchemaError("/model/dropout", "expected 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!d[i].is_number()) throw SchemaError("/model/dropout/" + std::to_string(i), "expected a number");
      m.dropout.rate[i] = d[i].get<double>();
    }
  }
  return m;
}

json location_json(const std::optional<EditLocation>& loc) {
  if (!loc) return nullptr;
  return {{"begin", loc->begin}, {"end", loc->end}};
}

std::optional<EditLocation> location_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  check_keys(j, {"begin", "end"}, "/location");
  EditLocation loc;
  if (!j.contains("begin")) throw SchemaError("/location/begin", "required");
  field(j, "begin", loc.begin, "/location");
  loc.end = loc.begin;
  field(j, "end", loc.end, "/location");
  return loc;
}

json request_json(const SynthesisRequest& r) {
  return {{"edit", to_json(r.edit)},
          {"style", r.style},
          {"cost", to_json(r.cost)},
          {"stitch", to_json(r.stitch)},
          {"location", location_json(r.location)}};
}

SynthesisRequest request_from_json(const json& j) {
  SynthesisRequest r;
  try {
    r.edit = edit_script_from_json(j.at("edit"));
    r.style = j.at("style").get<std::string>();
  } catch (const json::exception& e) {
    throw SchemaError("/request", e.what());
  }
  r.cost = cost_config_from_json(j.value("cost", json()), CostConfig{});
  r.stitch = stitch_config_from_json(j.value("stitch", json()), StitchConfig{});
  r.location = location_from_json(j.value("location", json()));
  return r;
}

std::string track_file(const std::string& rid, const char* which) { return rid + "." + which + ".f32"; }

std::string history_name(std::size_t seq) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << seq << ".json";
  return os.str();
}

std::shared_ptr<const EngineContext> build_context(const SessionSpec& spec, const RetargetModel* trained,
                                                   const fs::path& model_path) {
  auto ctx = std::make_shared<EngineContext>();
  const fs::path cfg_dir = default_config_dir();
  ctx->table = VisemeTable::load(spec.visemes.empty() ? cfg_dir / "visemes.tsv" : spec.visemes);
  ctx->lexicon = Lexicon::load(spec.lexicon.empty() ? cfg_dir / "lexicon.dict" : spec.lexicon);
  ctx->target = load_target(spec.target);
  if (!spec.repositories.contains("neutral")) throw SchemaError("/repositories", "a \"neutral\" repository is required");
  for (const auto& [style, path] : spec.repositories) {
    RepositoryBundle b = load_bundle(path, ctx->target.track.fps);
    ctx->styles[style] = StyleRepository::make(std::move(b), ctx->table);
  }
  if (trained) {
    ctx->model = std::make_shared<const RetargetModel>(*trained);
  } else {
    ctx->model = std::make_shared<const RetargetModel>(RetargetModel::load(model_path));
  }
  return ctx;
}

bool same_result(const SynthesisResult& a, const SynthesisResult& b) {
  return a.id == b.id && encode_track_f32(a.track) == encode_track_f32(b.track) &&
         encode_track_f32(a.stitched) == encode_track_f32(b.stitched) && a.trace == b.trace &&
         a.partition == b.partition && a.full == b.full;
}

}  // namespace

json to_json(const SessionSpec& spec) {
  json repos = json::object();
  for (const auto& [k, v] : spec.repositories) repos[k] = v.string();
  return {{"target", spec.target.string()},
          {"repositories", std::move(repos)},
          {"model", spec.model ? json(spec.model->string()) : json(nullptr)},
          {"visemes", spec.visemes.string()},
          {"lexicon", spec.lexicon.string()},
          {"cost", to_json(spec.engine.cost)},
          {"stitch", to_json(spec.engine.stitch)},
          {"train", train_json(spec.engine.train)},
          {"model_config", model_json(spec.engine.model)}};
}

SessionSpec session_spec_from_json(const json& j, const EngineConfig& defaults) {
  check_keys(j, {"target", "repositories", "model", "visemes", "lexicon", "cost", "stitch", "train", "model_config"}, "");
  SessionSpec s;
  s.engine = defaults;
  if (!j.contains("target") || !j.at("target").is_string()) throw SchemaError("/target", "path required");
  s.target = j.at("target").get<std::string>();
  if (!j.contains("repositories") || !j.at("repositories").is_object() || j.at("repositories").empty()) {
    throw SchemaError("/repositories", "expected an object of style -> bundle path");
  }
  for (const auto& [k, v] : j.at("repositories").items()) {
    if (!v.is_string()) throw SchemaError("/repositories/" + k, "expected a path");
    s.repositories[k] = v.get<std::string>();
  }
  if (j.contains("model") && !j.at("model").is_null()) {
    if (!j.at("model").is_string()) throw SchemaError("/model", "expected a checkpoint path");
    s.model = j.at("model").get<std::string>();
  }
  for (const char* key : {"visemes", "lexicon"}) {
    if (j.contains(key) && !j.at(key).is_string()) throw SchemaError(std::string("/") + key, "expected a path");
  }
  s.visemes = j.value("visemes", std::string());
  s.lexicon = j.value("lexicon", std::string());
  s.engine.cost = cost_config_from_json(j.value("cost", json()), s.engine.cost);
  s.engine.stitch = stitch_config_from_json(j.value("stitch", json()), s.engine.stitch);
  const json train = j.value("train", json());
  s.engine.train = train_from_json(train, s.engine.train);
  s.engine.model = model_from_json(j.value("model_config", json()), s.engine.model);
  // Shorthand so a client can ask for a small model with {"train": {"hidden": 64}}.
  if (train.is_object() && train.contains("hidden")) field(train, "hidden", s.engine.model.hidden, "/train");
  s.engine.model.lambda = s.engine.train.lambda;
  try {
    s.engine.cost.validate();
    s.engine.stitch.validate();
    s.engine.train.validate();
    s.engine.model.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError("/", e.what());
  }
  return s;
}

EditRequest edit_request_from_json(const json& j) {
  check_keys(j, {"text", "style", "overrides", "cost", "location", "alignment", "phoneme_rate"}, "");
  EditRequest r;
  if (!j.contains("text") || !j.at("text").is_string()) throw SchemaError("/text", "edit text required");
  r.text = j.at("text").get<std::string>();
  if (j.contains("style")) {
    if (!j.at("style").is_string()) throw SchemaError("/style", "expected a string");
    r.style = j.at("style").get<std::string>();
  }
  r.overrides = stitch_overrides_from_json(j.value("overrides", json()));
  if (j.contains("cost") && !j.at("cost").is_null()) r.cost = cost_config_from_json(j.at("cost"));
  r.location = location_from_json(j.value("location", json()));
  if (j.contains("alignment") && !j.at("alignment").is_null()) {
    if (!j.at("alignment").is_string()) throw SchemaError("/alignment", "expected alignment text");
    std::istringstream in(j.at("alignment").get<std::string>());
    r.alignment = parse_alignment(in);
  }
  field(j, "phoneme_rate", r.phoneme_rate, "");
  return r;
}

json to_json(const HistoryEntry& e) {
  return {{"seq", e.seq},
          {"kind", e.kind},
          {"result", e.result},
          {"parent", e.parent},
          {"request", request_json(e.request)},
          {"overrides", to_json(e.overrides)}};
}

HistoryEntry history_entry_from_json(const json& j) {
  HistoryEntry e;
  try {
    e.seq = j.at("seq").get<std::size_t>();
    e.kind = j.at("kind").get<std::string>();
    e.result = j.at("result").get<std::string>();
    e.parent = j.at("parent").get<std::string>();
  } catch (const json::exception& ex) {
    throw SchemaError("/history", ex.what());
  }
  if (e.kind != "edit" && e.kind != "refine") throw SchemaError("/kind", "unknown history kind '" + e.kind + "'");
  e.request = request_from_json(j.at("request"));
  e.overrides = stitch_overrides_from_json(j.value("overrides", json()));
  return e;
}

std::shared_ptr<Session> Session::create(std::string id, const fs::path& dir, SessionSpec spec,
                                         const TrainProgress& progress) {
  if (fs::exists(dir)) throw Error("session directory " + dir.string() + " already exists");
  auto s = std::shared_ptr<Session>(new Session());
  s->id_ = std::move(id);
  s->dir_ = dir;

  std::optional<RetargetModel> trained;
  if (!spec.model) {
    // Only the neutral style trains the model; other styles reuse it.
    const VisemeTable table = VisemeTable::load(spec.visemes.empty() ? default_config_dir() / "visemes.tsv" : spec.visemes);
    const TargetClip target = load_target(spec.target);
    const auto it = spec.repositories.find("neutral");
    if (it == spec.repositories.end()) throw SchemaError("/repositories", "a \"neutral\" repository is required");
    const RepositoryBundle neutral = load_bundle(it->second, target.track.fps);
    TrainConfig tc = spec.engine.train;
    if (progress) {
      tc.on_epoch = [&](const EpochReport& r) {
        progress(r);
        return true;
      };
    }
    trained = train_retargeting(neutral, target, table, spec.engine.model, tc, spec.engine.cost).model;
  }
  s->ctx_ = build_context(spec, trained ? &*trained : nullptr, spec.model.value_or(fs::path()));
  s->spec_ = std::move(spec);

  fs::create_directories(dir / "history");
  fs::create_directories(dir / "results");
  write_file_atomic(dir / "model.rtm", s->ctx_->model->serialize());
  const json manifest = {{"format", kSessionFormat},
                         {"id", s->id_},
                         {"spec", to_json(s->spec_)},
                         {"model_checksum", hex64(s->ctx_->model->checksum())}};
  write_file_atomic(dir / "session.json", manifest.dump(2));
  return s;
}

std::shared_ptr<Session> Session::open(const fs::path& dir) {
  const json manifest = read_json(dir / "session.json");
  if (manifest.value("format", "") != kSessionFormat) throw SchemaError("/format", "not a session manifest");
  auto s = std::shared_ptr<Session>(new Session());
  s->id_ = manifest.at("id").get<std::string>();
  s->dir_ = dir;
  s->spec_ = session_spec_from_json(manifest.at("spec"));
  s->ctx_ = build_context(s->spec_, nullptr, dir / "model.rtm");
  if (hex64(s->ctx_->model->checksum()) != manifest.at("model_checksum").get<std::string>()) {
    throw Error("session " + s->id_ + ": model checkpoint does not match its recorded checksum");
  }

  std::vector<fs::path> records;
  for (const auto& e : fs::directory_iterator(dir / "history")) {
    if (e.path().extension() == ".json") records.push_back(e.path());
  }
  std::sort(records.begin(), records.end());
  for (const fs::path& p : records) {
    HistoryEntry entry = history_entry_from_json(read_json(p));
    if (entry.seq != s->history_.size()) throw SchemaError(p.string(), "history sequence gap");
    auto r = s->execute(entry);
    if (r->id != entry.result) {
      throw Error("session " + s->id_ + ": history entry " + std::to_string(entry.seq) + " no longer reproduces");
    }
    const fs::path stored = dir / "results" / track_file(r->id, "track");
    if (fs::exists(stored)) {
      if (read_bytes(stored) != encode_track_f32(r->track)) {
        throw Error("session " + s->id_ + ": recomputed track for " + r->id + " differs from the stored one");
      }
    } else {
      s->persist_result(*r);
    }
    s->results_.emplace(r->id, std::move(r));
    s->history_.push_back(std::move(entry));
  }
  return s;
}

void Session::persist_result(const SynthesisResult& r) const {
  const fs::path base = dir_ / "results";
  write_file_atomic(base / track_file(r.id, "track"), encode_track_f32(r.track));
  write_file_atomic(base / track_file(r.id, "stitched"), encode_track_f32(r.stitched));
  json ctxj = json::object();
  if (r.context.left) ctxj["left"] = {to_string(r.context.left->kind), r.context.left->name, r.context.left->start_s, r.context.left->end_s};
  if (r.context.right) ctxj["right"] = {to_string(r.context.right->kind), r.context.right->name, r.context.right->start_s, r.context.right->end_s};
  const json doc = {{"id", r.id},
                    {"parent", r.parent},
                    {"request", request_json(r.request)},
                    {"context", std::move(ctxj)},
                    {"partition", to_json(r.partition)},
                    {"trace", to_json(r.trace)},
                    {"frames", r.track.size()},
                    {"fps", r.track.fps},
                    {"model_checksum", hex64(r.model_checksum)}};
  write_file_atomic(base / (r.id + ".json"), doc.dump(2));
}

std::shared_ptr<const SynthesisResult> Session::execute(const HistoryEntry& entry) const {
  if (entry.kind == "edit") return std::make_shared<const SynthesisResult>(synthesize(*ctx_, entry.request));
  std::shared_ptr<const SynthesisResult> parent;
  {
    std::lock_guard lock(mu_);
    const auto it = results_.find(entry.parent);
    if (it == results_.end()) throw NotFoundError("unknown result '" + entry.parent + "'");
    parent = it->second;
  }
  return std::make_shared<const SynthesisResult>(phonosynth::refine(*ctx_, *parent, entry.overrides));
}

std::string Session::commit(HistoryEntry entry, std::shared_ptr<const SynthesisResult> result) {
  bool known = false;
  {
    std::lock_guard lock(mu_);
    entry.seq = history_.size();
    known = results_.contains(result->id);
  }
  // Result files first; the history record is the commit point.
  if (!known) persist_result(*result);
  write_file_atomic(dir_ / "history" / history_name(entry.seq), to_json(entry).dump(2));
  std::lock_guard lock(mu_);
  const std::string id = result->id;
  results_.emplace(id, std::move(result));
  history_.push_back(std::move(entry));
  return id;
}

std::string Session::synthesize_edit(const EditRequest& request) {
  std::lock_guard op(op_mu_);
  EditTiming timing;
  timing.alignment = request.alignment;
  timing.phoneme_rate = request.phoneme_rate;
  HistoryEntry entry;
  entry.kind = "edit";
  entry.overrides = request.overrides;
  entry.request.edit = parse_edit_script(request.text, ctx_->lexicon, ctx_->table, timing);
  entry.request.style = request.style;
  entry.request.cost = request.cost.value_or(spec_.engine.cost);
  entry.request.stitch = apply_overrides(spec_.engine.stitch, request.overrides);
  entry.request.location = request.location;
  auto result = execute(entry);
  entry.result = result->id;
  return commit(std::move(entry), std::move(result));
}

std::string Session::refine(const std::string& result_id, const StitchOverrides& overrides) {
  std::lock_guard op(op_mu_);
  HistoryEntry entry;
  entry.kind = "refine";
  entry.parent = result_id;
  entry.overrides = overrides;
  auto result = execute(entry);
  entry.request = result->request;
  entry.result = result->id;
  return commit(std::move(entry), std::move(result));
}

std::shared_ptr<const SynthesisResult> Session::result(const std::string& result_id) const {
  std::lock_guard lock(mu_);
  const auto it = results_.find(result_id);
  if (it == results_.end()) throw NotFoundError("unknown result '" + result_id + "'");
  return it->second;
}

std::vector<HistoryEntry> Session::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

bool Session::replay(std::size_t seq) const {
  HistoryEntry entry;
  std::shared_ptr<const SynthesisResult> recorded;
  {
    std::lock_guard lock(mu_);
    if (seq >= history_.size()) throw NotFoundError("no history entry " + std::to_string(seq));
    entry = history_[seq];
    recorded = results_.at(entry.result);
  }
  return same_result(*execute(entry), *recorded);
}

json Session::summary() const {
  json styles = json::array();
  for (const auto& [name, _] : ctx_->styles) styles.push_back(name);
  json hist = json::array();
  for (const HistoryEntry& e : history()) {
    hist.push_back({{"seq", e.seq},
                    {"kind", e.kind},
                    {"result", e.result},
                    {"parent", e.parent},
                    {"text", e.request.edit.text},
                    {"style", e.request.style},
                    {"overrides", to_json(e.overrides)}});
  }
  return {{"id", id_},
          {"styles", std::move(styles)},
          {"target_tokens", ctx_->target.tokens.size()},
          {"target_frames", ctx_->target.track.size()},
          {"fps", ctx_->target.track.fps},
          {"model_checksum", hex64(ctx_->model->checksum())},
          {"defaults", {{"cost", to_json(spec_.engine.cost)}, {"stitch", to_json(spec_.engine.stitch)}}},
          {"history", std::move(hist)}};
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

std::shared_ptr<Session> SessionStore::create(SessionSpec spec, const TrainProgress& progress) {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::system_clock::now().time_since_epoch().count();
  const std::string seed = to_json(spec).dump() + std::to_string(now) + "/" + std::to_string(counter++);
  const std::string id = hex64(fnv1a64(seed)).substr(0, 12);
  auto session = Session::create(id, root_ / id, std::move(spec), progress);
  std::lock_guard lock(mu_);
  open_[id] = session;
  return session;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) {
  const bool well_formed =
      !id.empty() && id.size() <= 32 && std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
  if (!well_formed) throw NotFoundError("unknown session '" + id + "'");
  std::lock_guard lock(mu_);
  if (const auto it = open_.find(id); it != open_.end()) return it->second;
  if (!fs::exists(root_ / id / "session.json")) throw NotFoundError("unknown session '" + id + "'");
  auto session = Session::open(root_ / id);
  open_[id] = session;
  return session;
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root_)) {
    if (fs::exists(e.path() / "session.json")) ids.push_back(e.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace phonosynth
