#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "phonosynth/token.hpp"

namespace phonosynth {

// CMU-dictionary style pronunciation lexicon: `WORD P1 P2 ...` per line,
// `;;;` comments, alternate pronunciations `WORD(2)` ignored.
class Lexicon {
 public:
  static Lexicon parse(std::istream& in);
  static Lexicon load(const std::filesystem::path& path);

  void add(std::string word, std::vector<std::string> phonemes);

  // Case-insensitive. Throws OutOfVocabularyError with the nearest keys.
  const std::vector<std::string>& pronounce(std::string_view word) const;
  bool contains(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

  // Up to `count` lexicon words closest to `word` by edit distance.
  std::vector<std::string> suggestions(std::string_view word, std::size_t count = 3) const;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

// Upper-cases a word and strips surrounding punctuation (apostrophes kept).
std::string normalize_word(std::string_view word);

inline constexpr double kDefaultPhonemeRate = 12.0;

// Uniform-duration phonemes at `rate` per second, concatenated in word order
// starting at time 0.
TokenSequence g2p_fallback(std::string_view words, const Lexicon& lexicon,
                           double rate = kDefaultPhonemeRate);

}  // namespace phonosynth
