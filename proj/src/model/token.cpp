#include "phonosynth/token.hpp"

#include <cmath>
#include <sstream>

#include "phonosynth/errors.hpp"

namespace phonosynth {

Token phoneme(std::string name, double start_s, double end_s) {
  return Token{TokenKind::phoneme, std::move(name), start_s, end_s};
}

Token gesture(std::string name, double start_s, double end_s) {
  return Token{TokenKind::gesture, std::move(name), start_s, end_s};
}

TokenSequence::TokenSequence(std::vector<Token> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const Token& t = tokens_[i];
    if (!std::isfinite(t.start_s) || !std::isfinite(t.end_s)) {
      throw Error("token " + std::to_string(i) + " '" + t.name + "' has non-finite times");
    }
    if (t.start_s < 0.0) {
      throw Error("token " + std::to_string(i) + " '" + t.name + "' starts before 0");
    }
    if (!(t.end_s > t.start_s)) {
      throw Error("token " + std::to_string(i) + " '" + t.name + "' has end <= start");
    }
    if (i > 0 && t.start_s < tokens_[i - 1].end_s) {
      throw Error("token " + std::to_string(i) + " '" + t.name + "' overlaps its predecessor");
    }
  }
}

TokenSequence TokenSequence::shifted(double offset_s) const {
  std::vector<Token> out = tokens_;
  for (Token& t : out) {
    t.start_s += offset_s;
    t.end_s += offset_s;
  }
  return TokenSequence(std::move(out));
}

std::string to_string(TokenKind kind) {
  return kind == TokenKind::phoneme ? "phoneme" : "gesture";
}

std::string describe(std::span<const Token> tokens) {
  std::ostringstream os;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) os << ' ';
    os << tokens[i].name;
  }
  return os.str();
}

}  // namespace phonosynth
