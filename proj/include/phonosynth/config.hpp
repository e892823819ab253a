#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phonosynth/datagen.hpp"
#include "phonosynth/retarget.hpp"
#include "phonosynth/search.hpp"
#include "phonosynth/stitch.hpp"

namespace phonosynth {

// Defaults for every engine stage. TOML tables [cost], [stitch], [train] and
// [model]; missing keys keep their built-in values, unknown keys are errors.
struct EngineConfig {
  CostConfig cost;
  StitchConfig stitch;
  TrainConfig train;
  ModelConfig model;
};

EngineConfig parse_engine_config(std::string_view toml_text, const std::string& source = "<string>");
EngineConfig load_engine_config(const std::filesystem::path& path);

// A cost file may hold a [cost] table or bare top-level keys.
CostConfig load_cost_config(const std::filesystem::path& path);

struct StyleVariant {
  std::string name;
  double gain = 1.0;
  std::uint64_t token_seed = 1;
};

// World parameters plus the repository styles to generate.
struct DatagenPlan {
  SynthSpec spec;
  std::vector<StyleVariant> styles;
};

DatagenPlan parse_datagen_plan(std::string_view toml_text, const std::string& source = "<string>");
DatagenPlan load_datagen_plan(const std::filesystem::path& path);

// Directory holding visemes.tsv, lexicon.dict and defaults.toml: the
// PHONOSYNTH_CONFIG_DIR environment variable, else the source tree's config/.
std::filesystem::path default_config_dir();

// `spec` with the style's label, gain and token seed.
SynthSpec spec_for_style(const SynthSpec& spec, const StyleVariant& style);

}  // namespace phonosynth
