#pragma once

#include <cstddef>
#include <vector>

#include "phonosynth/bundle.hpp"
#include "phonosynth/expression.hpp"
#include "phonosynth/search.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

// Frame-aligned source/target training pair. Source frames are the
// repository frames under the matched tokens; target frames are the target
// track retimed onto the repository phoneme intervals and sampled at the
// same frame times.
struct CorrespondencePair {
  std::vector<ExpressionFrame> source;
  std::vector<ExpressionFrame> target;
  std::size_t repo_begin = 0;  // repository tokens [repo_begin, repo_end)
  std::size_t repo_end = 0;
  std::size_t target_begin = 0;  // target tokens [target_begin, target_end)
  std::size_t target_end = 0;
  int rank = 0;  // 0 for the best match, 1 for the runner-up
  double match_cost = 0.0;

  std::size_t token_count() const { return repo_end - repo_begin; }
};

struct CorrespondenceSet {
  std::vector<CorrespondencePair> pairs;
  // Repository token positions whose viseme never occurs in the target.
  std::vector<std::size_t> gaps;

  // Fraction of repository tokens covered by at least one pair.
  double coverage(std::size_t repo_tokens) const;
};

// Greedy scan over the repository: at each position the longest viseme-equal
// run that also occurs in the target is matched to up to two target runs
// (lowest match cost first, earliest on ties); the scan resumes on the last
// matched token so consecutive pairs share one token. Throws Error when the
// target matches nothing.
CorrespondenceSet build_correspondences(const RepositoryBundle& repo, const TokenSequence& target_tokens,
                                        const ExpressionTrack& target_track, const VisemeTable& table,
                                        const CostConfig& cfg, int max_matches = 2);

}  // namespace phonosynth
