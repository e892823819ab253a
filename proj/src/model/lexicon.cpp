#include "phonosynth/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "phonosynth/errors.hpp"

namespace phonosynth {

namespace {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) {
    std::string norm = normalize_word(w);
    if (!norm.empty()) words.push_back(std::move(norm));
  }
  return words;
}

}  // namespace

std::string normalize_word(std::string_view word) {
  auto keep = [](unsigned char c) { return std::isalnum(c) || c == '\''; };
  std::size_t b = 0, e = word.size();
  while (b < e && !keep(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && !keep(static_cast<unsigned char>(word[e - 1]))) --e;
  std::string out(word.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

Lexicon Lexicon::parse(std::istream& in) {
  Lexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind(";;;", 0) == 0) continue;
    std::istringstream is(line);
    std::string word;
    is >> word;
    if (word.empty()) continue;
    // Alternate pronunciations: WORD(2)
    if (word.back() == ')' && word.find('(') != std::string::npos) continue;
    std::vector<std::string> phones;
    std::string p;
    while (is >> p) phones.push_back(p);
    if (phones.empty()) continue;
    lex.add(word, std::move(phones));
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon " + path.string());
  return parse(in);
}

void Lexicon::add(std::string word, std::vector<std::string> phonemes) {
  entries_.insert_or_assign(normalize_word(word), std::move(phonemes));
}

bool Lexicon::contains(std::string_view word) const {
  return entries_.contains(normalize_word(word));
}

const std::vector<std::string>& Lexicon::pronounce(std::string_view word) const {
  const std::string key = normalize_word(word);
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw OutOfVocabularyError(key, suggestions(key));
  return it->second;
}

std::vector<std::string> Lexicon::suggestions(std::string_view word, std::size_t count) const {
  const std::string key = normalize_word(word);
  std::vector<std::pair<std::size_t, std::string>> scored;
  scored.reserve(entries_.size());
  for (const auto& [w, _] : entries_) scored.emplace_back(edit_distance(key, w), w);
  const std::size_t n = std::min(count, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
  return out;
}

TokenSequence g2p_fallback(std::string_view words, const Lexicon& lexicon, double rate) {
  if (!(rate > 0.0)) throw Error("phoneme rate must be positive");
  const double dur = 1.0 / rate;
  std::vector<Token> tokens;
  std::size_t index = 0;
  for (const std::string& w : split_words(words)) {
    for (const std::string& p : lexicon.pronounce(w)) {
      // Times from the index avoid accumulating rounding error.
      const double start = static_cast<double>(index) * dur;
      const double end = static_cast<double>(index + 1) * dur;
      tokens.push_back(phoneme(p, start, end));
      ++index;
    }
  }
  return TokenSequence(std::move(tokens));
}

}  // namespace phonosynth
