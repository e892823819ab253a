#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "phonosynth/lexicon.hpp"
#include "phonosynth/token.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

inline constexpr double kDefaultGestureDuration = 0.5;

// Where phoneme timings for an edit come from. With an alignment, the
// lexicon expansion of the words is matched against the aligned phonemes in
// order and their timings are used; without one, phonemes get uniform
// durations at `phoneme_rate`.
struct EditTiming {
  std::optional<TokenSequence> alignment;
  double phoneme_rate = kDefaultPhonemeRate;
};

// Edit text such as "the quick [smile:1.5s] fox" and its resolved tokens.
struct EditScript {
  std::string text;
  TokenSequence tokens;

  friend bool operator==(const EditScript&, const EditScript&) = default;
};

// Words become phonemes via the lexicon; `[name]` and `[name:1.5s]`
// directives become gesture tokens of 0.5 s or the stated duration, inserted
// after the preceding token and pushing later tokens back. Throws
// InvalidEditError for empty edits, malformed directives and alignment
// mismatches, OutOfVocabularyError for unknown words.
EditScript parse_edit_script(std::string_view text, const Lexicon& lexicon, const VisemeTable& table,
                             const EditTiming& timing = {});

nlohmann::json to_json(const EditScript& script);
EditScript edit_script_from_json(const nlohmann::json& j);

}  // namespace phonosynth
