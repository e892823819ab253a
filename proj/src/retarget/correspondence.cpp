#include "phonosynth/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "phonosynth/errors.hpp"

namespace phonosynth {

double CorrespondenceSet::coverage(std::size_t repo_tokens) const {
  if (repo_tokens == 0) return 0.0;
  std::vector<bool> hit(repo_tokens, false);
  for (const auto& p : pairs) {
    for (std::size_t i = p.repo_begin; i < p.repo_end && i < repo_tokens; ++i) hit[i] = true;
  }
  return static_cast<double>(std::count(hit.begin(), hit.end(), true)) / static_cast<double>(repo_tokens);
}

namespace {

std::vector<int> classes_of(const TokenSequence& seq, const VisemeTable& table) {
  std::vector<int> out;
  out.reserve(seq.size());
  for (const Token& t : seq) out.push_back(table.viseme_of(t));
  return out;
}

// Maps repository time tau inside [src.front().start, src.back().end) onto
// the target tokens, token by token, gaps included.
double to_target_time(double tau, std::span<const Token> src, std::span<const Token> dst) {
  for (std::size_t m = 0; m < src.size(); ++m) {
    const Token& v = src[m];
    const Token& w = dst[m];
    if (tau < v.start_s) {
      const Token& vp = src[m - 1];
      const Token& wp = dst[m - 1];
      const double frac = (tau - vp.end_s) / (v.start_s - vp.end_s);
      return wp.end_s + frac * (w.start_s - wp.end_s);
    }
    if (tau < v.end_s) return w.start_s + (tau - v.start_s) * (w.duration() / v.duration());
  }
  return dst.back().end_s;
}

}  // namespace

CorrespondenceSet build_correspondences(const RepositoryBundle& repo, const TokenSequence& target_tokens,
                                        const ExpressionTrack& target_track, const VisemeTable& table,
                                        const CostConfig& cfg, int max_matches) {
  if (repo.tokens.empty() || target_tokens.empty()) throw Error("correspondence search needs non-empty sequences");
  if (target_track.empty()) throw Error("target track is empty");
  if (max_matches < 1) throw Error("max_matches must be >= 1");

  const std::vector<int> rv = classes_of(repo.tokens, table);
  const std::vector<int> tv = classes_of(target_tokens, table);
  const std::size_t n = rv.size();
  const std::size_t m = tv.size();
  const double fps = repo.track.fps;

  CorrespondenceSet out;
  std::size_t i = 0;
  std::size_t overlap_token = n;  // last token of the previous pair
  std::vector<std::size_t> lce(m);
  while (i < n) {
    std::size_t best_k = 0;
    for (std::size_t j = 0; j < m; ++j) {
      std::size_t k = 0;
      while (i + k < n && j + k < m && rv[i + k] == tv[j + k]) ++k;
      lce[j] = k;
      best_k = std::max(best_k, k);
    }
    if (best_k == 0) {
      out.gaps.push_back(i);
      ++i;
      continue;
    }
    if (best_k == 1 && i == overlap_token) {
      // Nothing new beyond the token the previous pair already used.
      ++i;
      continue;
    }

    const auto src = repo.tokens.tokens().subspan(i, best_k);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j = 0; j < m; ++j) {
      if (lce[j] != best_k) continue;
      const Cost c = match_cost(target_tokens.tokens().subspan(j, best_k), src, cfg, table);
      if (c.is_match()) ranked.emplace_back(c.value(), j);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (ranked.size() > static_cast<std::size_t>(max_matches)) ranked.resize(static_cast<std::size_t>(max_matches));

    // Repository frames under the matched tokens.
    const auto f0 = static_cast<std::size_t>(std::max(0.0, std::ceil(detail::snap_frame_position(src.front().start_s * fps))));
    auto f1 = static_cast<std::size_t>(std::max(0.0, std::ceil(detail::snap_frame_position(src.back().end_s * fps))));
    f1 = std::min(f1, repo.track.size());

    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const std::size_t j = ranked[r].second;
      const auto dst = target_tokens.tokens().subspan(j, best_k);
      CorrespondencePair pair;
      pair.repo_begin = i;
      pair.repo_end = i + best_k;
      pair.target_begin = j;
      pair.target_end = j + best_k;
      pair.rank = static_cast<int>(r);
      pair.match_cost = ranked[r].first;
      for (std::size_t f = f0; f < f1; ++f) {
        const double tau = static_cast<double>(f) / fps;
        pair.source.push_back(repo.track.frames[f]);
        pair.target.push_back(ExpressionFrame::from(target_track.sample(to_target_time(tau, src, dst))));
      }
      if (!pair.source.empty()) out.pairs.push_back(std::move(pair));
    }
    overlap_token = i + best_k - 1;
    i += std::max<std::size_t>(1, best_k - 1);
  }
  if (out.pairs.empty()) throw Error("target clip shares no viseme run with the repository");
  return out;
}

}  // namespace phonosynth
