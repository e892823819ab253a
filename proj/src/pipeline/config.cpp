#include "phonosynth/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "phonosynth/errors.hpp"

namespace phonosynth {

namespace {

class TableReader {
 public:
  TableReader(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      out = require<bool>(node, key);
    } else if constexpr (std::is_integral_v<T>) {
      const auto v = require<std::int64_t>(node, key);
      if (v < 0 && std::is_unsigned_v<T>) throw SchemaError(where(key), "must be non-negative");
      out = static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (const auto i = node->value_exact<std::int64_t>()) {
        out = static_cast<T>(*i);
      } else {
        out = static_cast<T>(require<double>(node, key));
      }
    } else {
      out = require<std::string>(node, key);
    }
  }

  void read_array(const char* key, std::array<double, 3>& out) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    const toml::array* arr = node->as_array();
    if (!arr || arr->size() != out.size()) throw SchemaError(where(key), "expected an array of 3 numbers");
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto v = (*arr)[i].value<double>();
      if (!v) throw SchemaError(where(key) + "/" + std::to_string(i), "expected a number");
      out[i] = *v;
    }
  }

  // Unknown keys are most likely typos; reject them.
  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!seen_.count(std::string(k.str()))) throw SchemaError(where(std::string(k.str())), "unknown key");
    }
  }

  void ignore(const char* key) { seen_.insert(key); }

 private:
  template <typename T>
  T require(const toml::node* node, const std::string& key) const {
    const auto v = node->value_exact<T>();
    if (!v) throw SchemaError(where(key), "wrong value type");
    return *v;
  }
  std::string where(const std::string& key) const { return path_ + "/" + key; }

  const toml::table* table_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

toml::table parse_toml(std::string_view text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ")";
    throw SchemaError(source, msg.str());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const toml::table* subtable(const toml::table& root, const char* key) {
  const toml::node* n = root.get(key);
  if (!n) return nullptr;
  const toml::table* t = n->as_table();
  if (!t) throw SchemaError(std::string("/") + key, "expected a table");
  return t;
}

void read_cost(TableReader& r, CostConfig& c) {
  r.read("c_phoneme", c.c_phoneme);
  r.read("c_viseme", c.c_viseme);
  r.read("c_time", c.c_time);
  r.read("kappa_len", c.kappa_len);
  r.read("max_segment_len", c.max_segment_len);
  r.finish();
}

}  // namespace

EngineConfig parse_engine_config(std::string_view toml_text, const std::string& source) {
  const toml::table root = parse_toml(toml_text, source);
  EngineConfig cfg;
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (key != "cost" && key != "stitch" && key != "train" && key != "model") {
      throw SchemaError("/" + key, "unknown section");
    }
  }
  {
    TableReader r(subtable(root, "cost"), "/cost");
    read_cost(r, cfg.cost);
  }
  {
    TableReader r(subtable(root, "stitch"), "/stitch");
    r.read("gaussian_sigma_frames", cfg.stitch.gaussian_sigma_frames);
    r.read("gaussian_radius_frames", cfg.stitch.gaussian_radius_frames);
    r.read("closure_frames", cfg.stitch.closure_frames);
    r.finish();
  }
  {
    TableReader r(subtable(root, "train"), "/train");
    r.read("learning_rate", cfg.train.learning_rate);
    r.read("decay_rate", cfg.train.decay_rate);
    r.read("decay_period", cfg.train.decay_period);
    r.read("clip_norm", cfg.train.clip_norm);
    r.read("batch_size", cfg.train.batch_size);
    r.read("max_epochs", cfg.train.max_epochs);
    r.read("lambda", cfg.train.lambda);
    r.read("seed", cfg.train.seed);
    r.finish();
  }
  {
    TableReader r(subtable(root, "model"), "/model");
    r.read("hidden", cfg.model.hidden);
    r.read("history", cfg.model.history);
    r.read("window", cfg.model.window);
    r.read_array("dropout", cfg.model.dropout.rate);
    r.read("seed", cfg.model.seed);
    r.read("output_init_scale", cfg.model.output_init_scale);
    r.finish();
  }
  cfg.model.lambda = cfg.train.lambda;
  try {
    cfg.cost.validate();
    cfg.stitch.validate();
    cfg.train.validate();
    cfg.model.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(source, e.what());
  }
  return cfg;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
  return parse_engine_config(read_file(path), path.string());
}

CostConfig load_cost_config(const std::filesystem::path& path) {
  const toml::table root = parse_toml(read_file(path), path.string());
  CostConfig c;
  if (const toml::table* t = subtable(root, "cost")) {
    TableReader r(t, "/cost");
    read_cost(r, c);
  } else {
    TableReader r(&root, "");
    read_cost(r, c);
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw SchemaError(path.string(), e.what());
  }
  return c;
}

DatagenPlan parse_datagen_plan(std::string_view toml_text, const std::string& source) {
  const toml::table root = parse_toml(toml_text, source);
  DatagenPlan plan;
  SynthSpec& s = plan.spec;
  TableReader r(&root, "");
  r.read("seed", s.seed);
  r.read("fps", s.fps);
  r.read("phoneme_rate", s.phoneme_rate);
  r.read("duration_s", s.duration_s);
  r.read("smoothing", s.smoothing);
  r.read("noise_sigma", s.noise_sigma);
  r.read("prototype_scale", s.prototype_scale);
  r.read("duration_jitter", s.duration_jitter);
  r.read("gap_probability", s.gap_probability);
  r.read("vocabulary_size", s.vocabulary_size);
  r.read("word_min_phonemes", s.word_min_phonemes);
  r.read("word_max_phonemes", s.word_max_phonemes);
  r.read("gestures_per_name", s.gestures_per_name);
  r.read("closure_exemplars", s.closure_exemplars);
  r.read("balanced_opening", s.balanced_opening);
  r.read("affine_strength", s.affine_strength);
  r.read("affine_offset", s.affine_offset);
  r.ignore("target");
  r.ignore("styles");
  r.finish();

  {
    TableReader t(subtable(root, "target"), "/target");
    t.read("seed", s.target_seed);
    t.read("duration_s", s.target_duration_s);
    t.read("coverage", s.coverage);
    t.finish();
  }

  if (const toml::node* n = root.get("styles")) {
    const toml::array* arr = n->as_array();
    if (!arr) throw SchemaError("/styles", "expected an array of tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::table* t = (*arr)[i].as_table();
      const std::string path = "/styles/" + std::to_string(i);
      if (!t) throw SchemaError(path, "expected a table");
      StyleVariant v;
      TableReader sr(t, path);
      sr.read("name", v.name);
      sr.read("gain", v.gain);
      sr.read("token_seed", v.token_seed);
      sr.finish();
      if (v.name.empty()) throw SchemaError(path + "/name", "style name required");
      plan.styles.push_back(std::move(v));
    }
  }
  if (plan.styles.empty()) plan.styles.push_back({"neutral", 1.0, s.token_seed});
  try {
    s.validate();
  } catch (const Error& e) {
    throw SchemaError(source, e.what());
  }
  return plan;
}

DatagenPlan load_datagen_plan(const std::filesystem::path& path) {
  return parse_datagen_plan(read_file(path), path.string());
}

SynthSpec spec_for_style(const SynthSpec& spec, const StyleVariant& style) {
  SynthSpec s = spec;
  s.style = style.name;
  s.style_gain = style.gain;
  s.token_seed = style.token_seed;
  return s;
}

std::filesystem::path default_config_dir() {
  if (const char* env = std::getenv("PHONOSYNTH_CONFIG_DIR"); env && *env) return env;
  return PHONOSYNTH_SOURCE_CONFIG_DIR;
}

}  // namespace phonosynth
