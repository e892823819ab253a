#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace phonosynth {

enum class TokenKind { phoneme, gesture };

// A phoneme or a mouth-gesture directive with its time interval in seconds.
struct Token {
  TokenKind kind = TokenKind::phoneme;
  std::string name;
  double start_s = 0.0;
  double end_s = 0.0;

  double duration() const { return end_s - start_s; }
  bool is_gesture() const { return kind == TokenKind::gesture; }

  friend bool operator==(const Token&, const Token&) = default;
};

Token phoneme(std::string name, double start_s, double end_s);
Token gesture(std::string name, double start_s, double end_s);

// Ordered, non-overlapping tokens. Gaps between tokens are silence.
class TokenSequence {
 public:
  TokenSequence() = default;
  // Throws Error when a token has end <= start, a negative start, or overlaps
  // its predecessor.
  explicit TokenSequence(std::vector<Token> tokens);

  std::span<const Token> tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const Token& operator[](std::size_t i) const { return tokens_[i]; }
  auto begin() const { return tokens_.begin(); }
  auto end() const { return tokens_.end(); }
  const Token& front() const { return tokens_.front(); }
  const Token& back() const { return tokens_.back(); }

  double start_s() const { return tokens_.empty() ? 0.0 : tokens_.front().start_s; }
  double end_s() const { return tokens_.empty() ? 0.0 : tokens_.back().end_s; }

  // Copy with every time shifted by `offset_s`.
  TokenSequence shifted(double offset_s) const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<Token> tokens_;
};

std::string to_string(TokenKind kind);

// Space-separated token names, for diagnostics.
std::string describe(std::span<const Token> tokens);

}  // namespace phonosynth
