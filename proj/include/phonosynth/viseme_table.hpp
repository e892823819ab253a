#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "phonosynth/token.hpp"

namespace phonosynth {

inline constexpr std::array<std::string_view, 8> kGestureNames = {
    "rest", "closed_smile", "teeth_smile", "big_smile", "sad", "scream", "mouth_left", "mouth_right"};

// The 39-symbol ARPAbet inventory without stress digits.
inline constexpr std::array<std::string_view, 39> kArpabet = {
    "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY",
    "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY",
    "P",  "R",  "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

// Maps phoneme and gesture names to dense viseme class ids. Phoneme classes
// come from a `phoneme<TAB>class_id` file; each gesture gets its own class
// after the largest phoneme class.
class VisemeTable {
 public:
  static VisemeTable parse(std::istream& in);
  static VisemeTable load(const std::filesystem::path& path);

  // Stress digits are ignored ("AH0" and "AH1" share a class). Throws
  // UnknownTokenError for names outside the phoneme and gesture sets.
  int viseme_of(std::string_view name) const;
  int viseme_of(const Token& token) const;

  bool contains(std::string_view name) const;
  bool is_gesture_name(std::string_view name) const;
  bool is_closure(std::string_view phoneme_name) const;

  int closure_class() const { return closure_class_; }
  int phoneme_class_count() const { return phoneme_classes_; }
  int class_count() const { return phoneme_classes_ + static_cast<int>(kGestureNames.size()); }

  // Phoneme names as listed in the table (no stress digits).
  const std::map<std::string, int, std::less<>>& phonemes() const { return phoneme_class_; }

 private:
  std::map<std::string, int, std::less<>> phoneme_class_;
  int phoneme_classes_ = 0;
  int closure_class_ = -1;
};

// Resolves gesture aliases ("smile" -> "teeth_smile"); returns the input for
// canonical names and an empty string for anything that is not a gesture.
std::string canonical_gesture_name(std::string_view name);

// "AH0" -> "AH"; names without a trailing stress digit are returned as-is.
std::string_view strip_stress(std::string_view name);

// Validates that phoneme names are in the table and gesture names are in the
// gesture vocabulary. Throws UnknownTokenError.
void check_token_names(const TokenSequence& tokens, const VisemeTable& table);

}  // namespace phonosynth
