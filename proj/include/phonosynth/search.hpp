#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phonosynth/bundle.hpp"
#include "phonosynth/token.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

struct CostConfig {
  double c_phoneme = 1.0;   // phoneme label differs
  double c_viseme = 10.0;   // viseme class differs
  double c_time = 4.0;      // per second of duration difference
  double kappa_len = 20.0;  // length cost is kappa_len / segment length
  int max_segment_len = 6;  // L

  void validate() const;
};

// Non-negative cost, or the explicit no-match value (infinite cost).
class Cost {
 public:
  constexpr explicit Cost(double value) : value_(value) {}
  static constexpr Cost no_match() { return Cost(); }

  constexpr bool is_match() const { return matched_; }
  // Only meaningful when is_match().
  constexpr double value() const { return value_; }

  friend constexpr Cost operator+(Cost a, Cost b) {
    return (a.matched_ && b.matched_) ? Cost(a.value_ + b.value_) : no_match();
  }
  friend constexpr bool operator==(Cost a, Cost b) {
    return a.matched_ == b.matched_ && (!a.matched_ || a.value_ == b.value_);
  }
  // No-match orders after every finite cost.
  friend constexpr bool operator<(Cost a, Cost b) {
    if (!a.matched_) return false;
    if (!b.matched_) return true;
    return a.value_ < b.value_;
  }

 private:
  constexpr Cost() : matched_(false) {}
  double value_ = 0.0;
  bool matched_ = true;
};

// Phonemes: c_phoneme * [name differs] + c_viseme * [class differs] +
// c_time * |duration difference|. Gestures: no-match unless both tokens are
// gestures with the same name, otherwise c_time * |duration difference|.
Cost substitution_cost(const Token& w, const Token& v, const CostConfig& cfg, const VisemeTable& table);

// Sum of element-wise substitution costs. Throws ShapeError on length
// mismatch.
Cost match_cost(std::span<const Token> wq, std::span<const Token> vq, const CostConfig& cfg,
                const VisemeTable& table);

// Compact per-token form used by the search loops.
struct CodedToken {
  int name = -1;    // interned phoneme label, or the class id for gestures
  int viseme = -1;
  bool gesture = false;
  double duration = 0.0;
};

// Must agree bit-for-bit with substitution_cost on the decoded tokens.
inline Cost substitution_cost(const CodedToken& w, const CodedToken& v, const CostConfig& cfg) {
  if (w.gesture || v.gesture) {
    if (w.gesture != v.gesture || w.name != v.name) return Cost::no_match();
    return Cost(cfg.c_time * std::abs(w.duration - v.duration));
  }
  const double name_term = cfg.c_phoneme * static_cast<double>(w.name != v.name);
  const double viseme_term = cfg.c_viseme * static_cast<double>(w.viseme != v.viseme);
  return Cost(name_term + viseme_term + cfg.c_time * std::abs(w.duration - v.duration));
}

// Viseme bi-gram index over the repository phonemes plus a per-class index
// of gesture annotations. Also holds the coded repository tokens.
class BigramIndex {
 public:
  // Throws Error when the repository has fewer than two phonemes.
  static BigramIndex build(const RepositoryBundle& repo, const VisemeTable& table);

  // Sorted start positions p with (class(V[p]), class(V[p+1])) == (first, second).
  std::span<const std::uint32_t> lookup(int first, int second) const;
  // Sorted positions p with class(V[p]) == cls.
  std::span<const std::uint32_t> lookup_unigram(int cls) const;
  // Sorted indices into repo.gestures whose class is `cls`.
  std::span<const std::uint32_t> lookup_gesture(int cls) const;

  std::size_t bigram_entry_count() const { return bigram_entries_; }
  std::size_t gesture_entry_count() const { return gesture_entries_; }
  std::size_t size() const { return bigram_entries_ + gesture_entries_; }
  int class_count() const { return classes_; }

  std::span<const CodedToken> repository() const { return coded_; }
  std::span<const CodedToken> gestures() const { return coded_gestures_; }

  // Codes a query token against this repository's label table. Labels the
  // repository never uses get a code that matches nothing.
  CodedToken code(const Token& t, const VisemeTable& table) const;

 private:
  int classes_ = 0;
  std::vector<std::vector<std::uint32_t>> bigrams_;   // classes_ * classes_
  std::vector<std::vector<std::uint32_t>> unigrams_;  // classes_
  std::vector<std::vector<std::uint32_t>> gesture_buckets_;
  std::size_t bigram_entries_ = 0;
  std::size_t gesture_entries_ = 0;
  std::unordered_map<std::string, int> names_;
  std::vector<CodedToken> coded_;
  std::vector<CodedToken> coded_gestures_;
};

BigramIndex build_index(const RepositoryBundle& repo, const VisemeTable& table);

// One segment of the optimal partition.
struct SegmentMatch {
  std::size_t core_begin = 0;  // [core_begin, core_end) indexes the edit
  std::size_t core_end = 0;
  bool left_context = false;   // query includes the token before the core
  bool right_context = false;  // query includes the token after the core
  bool gesture = false;        // matched against repo.gestures
  std::size_t repo_begin = 0;  // matched range [repo_begin, repo_end) in repo.tokens,
  std::size_t repo_end = 0;    // or in repo.gestures when `gesture`
  double match_cost = 0.0;
  double length_cost = 0.0;
  std::size_t candidate_count = 0;

  std::size_t core_size() const { return core_end - core_begin; }
  std::size_t query_size() const { return core_size() + left_context + right_context; }
  std::size_t match_size() const { return repo_end - repo_begin; }
  double cost() const { return match_cost + length_cost; }

  friend bool operator==(const SegmentMatch&, const SegmentMatch&) = default;
};

struct PartitionResult {
  std::vector<SegmentMatch> segments;
  double total_cost = 0.0;

  friend bool operator==(const PartitionResult&, const PartitionResult&) = default;
};

// Transcript tokens adjacent to the edit, with times already placed on the
// edit's timeline (left ends where the edit starts, right starts where it
// ends).
struct SearchContext {
  std::optional<Token> left;
  std::optional<Token> right;
};

struct SearchOptions {
  bool memoize = true;
};

// Expanded query for the core [begin, end): one neighbouring phoneme on each
// side when available. Gestures are never used as context and gesture cores
// are never expanded.
std::vector<Token> expanded_query(const TokenSequence& edit, const SearchContext& ctx, std::size_t begin,
                                  std::size_t end, bool* left_used = nullptr, bool* right_used = nullptr);

// Minimum-cost partition of the edit into segments of at most L tokens, each
// matched substitution-only against a repository range that starts with the
// same viseme bi-gram as the segment's expanded query. Throws NoMatchError
// when no finite-cost partition exists, InvalidEditError for empty edits.
// Equal-cost partitions resolve to fewer segments, then to the smaller
// sequence of (repo_begin, core_end) pairs.
PartitionResult optimal_partition(const TokenSequence& edit, const SearchContext& ctx, const RepositoryBundle& repo,
                                  const BigramIndex& index, const VisemeTable& table, const CostConfig& cfg,
                                  const SearchOptions& options = {});

struct OracleOptions {
  bool constrained = true;   // restrict matches to the query's leading viseme bi-gram
  bool allow_large = false;  // lift the instance-size guard
};

// Exhaustive enumeration of every partition and every repository window.
// Throws Error for instances beyond 12 edit tokens or 2000 repository tokens
// unless allow_large.
PartitionResult brute_force_oracle(const TokenSequence& edit, const SearchContext& ctx, const RepositoryBundle& repo,
                                   const VisemeTable& table, const CostConfig& cfg, const OracleOptions& options = {});

}  // namespace phonosynth
