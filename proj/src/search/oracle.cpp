// Exhaustive reference search. Deliberately shares nothing with the indexed
// search beyond the substitution cost: partitions are enumerated explicitly
// and every repository window of the right length is scanned.

#include <algorithm>
#include <functional>
#include <map>

#include "phonosynth/errors.hpp"
#include "phonosynth/search.hpp"

namespace phonosynth {

namespace {

struct Window {
  Cost cost = Cost::no_match();
  std::size_t begin = 0;
  std::size_t candidates = 0;
};

std::vector<Token> oracle_query(const TokenSequence& edit, const SearchContext& ctx, std::size_t begin,
                                std::size_t end, bool& left, bool& right) {
  left = right = false;
  std::vector<Token> core(edit.tokens().begin() + static_cast<std::ptrdiff_t>(begin),
                          edit.tokens().begin() + static_cast<std::ptrdiff_t>(end));
  const bool gesture_core = std::any_of(core.begin(), core.end(), [](const Token& t) { return t.is_gesture(); });
  if (gesture_core) return core;
  std::optional<Token> before = begin > 0 ? std::optional<Token>(edit[begin - 1]) : ctx.left;
  std::optional<Token> after = end < edit.size() ? std::optional<Token>(edit[end]) : ctx.right;
  std::vector<Token> q;
  if (before && !before->is_gesture()) {
    q.push_back(*before);
    left = true;
  }
  q.insert(q.end(), core.begin(), core.end());
  if (after && !after->is_gesture()) {
    q.push_back(*after);
    right = true;
  }
  return q;
}

Window scan(const std::vector<Token>& query, const RepositoryBundle& repo, const VisemeTable& table,
            const CostConfig& cfg, bool constrained) {
  Window best;
  if (query.size() == 1 && query[0].is_gesture()) {
    for (std::size_t g = 0; g < repo.gestures.size(); ++g) {
      if (constrained && table.viseme_of(repo.gestures[g]) != table.viseme_of(query[0])) continue;
      ++best.candidates;
      const Cost c = substitution_cost(query[0], repo.gestures[g], cfg, table);
      if (c < best.cost) {
        best.cost = c;
        best.begin = g;
      }
    }
    return best;
  }
  const auto v = repo.tokens.tokens();
  if (query.size() > v.size()) return best;
  for (std::size_t p = 0; p + query.size() <= v.size(); ++p) {
    if (constrained) {
      if (table.viseme_of(v[p]) != table.viseme_of(query[0])) continue;
      if (query.size() >= 2 && table.viseme_of(v[p + 1]) != table.viseme_of(query[1])) continue;
    }
    ++best.candidates;
    const Cost c = match_cost(query, v.subspan(p, query.size()), cfg, table);
    if (c < best.cost) {
      best.cost = c;
      best.begin = p;
    }
  }
  return best;
}

// Same-cost, same-size partitions: compare (repo_begin, core_end) pairs
// from the left.
bool earlier(const std::vector<SegmentMatch>& a, const std::vector<SegmentMatch>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = std::pair(a[i].repo_begin, a[i].core_end);
    const auto y = std::pair(b[i].repo_begin, b[i].core_end);
    if (x != y) return x < y;
  }
  return false;
}

}  // namespace

PartitionResult brute_force_oracle(const TokenSequence& edit, const SearchContext& ctx, const RepositoryBundle& repo,
                                   const VisemeTable& table, const CostConfig& cfg, const OracleOptions& options) {
  cfg.validate();
  if (edit.empty()) throw InvalidEditError("empty edit");
  if (!options.allow_large && (edit.size() > 12 || repo.tokens.size() > 2000)) {
    throw Error("instance too large for the brute-force oracle (set allow_large to override)");
  }
  const std::size_t m = edit.size();
  const auto max_len = static_cast<std::size_t>(cfg.max_segment_len);

  bool have_best = false;
  PartitionResult best;
  std::vector<SegmentMatch> current;
  // Scans depend only on (pos, len); cache them so that enumeration cost is
  // dominated by the partitions themselves.
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<Token>, Window>> scans;

  // Depth-first enumeration of every composition of m with parts <= L.
  std::function<void(std::size_t, double)> visit = [&](std::size_t pos, double total) {
    if (pos == m) {
      if (!have_best || total < best.total_cost ||
          (total == best.total_cost && current.size() < best.segments.size()) ||
          (total == best.total_cost && current.size() == best.segments.size() && earlier(current, best.segments))) {
        have_best = true;
        best.total_cost = total;
        best.segments = current;
      }
      return;
    }
    for (std::size_t len = 1; len <= max_len && pos + len <= m; ++len) {
      bool left = false, right = false;
      const std::vector<Token> query = oracle_query(edit, ctx, pos, pos + len, left, right);
      const bool gesture = std::any_of(query.begin(), query.end(), [](const Token& t) { return t.is_gesture(); });
      auto it = scans.find({pos, len});
      if (it == scans.end()) {
        it = scans.emplace(std::pair{pos, len}, std::pair{query, scan(query, repo, table, cfg, options.constrained)}).first;
      }
      const Window& w = it->second.second;
      if (!w.cost.is_match()) continue;
      SegmentMatch seg;
      seg.core_begin = pos;
      seg.core_end = pos + len;
      seg.left_context = left;
      seg.right_context = right;
      seg.gesture = gesture;
      seg.repo_begin = w.begin;
      seg.repo_end = w.begin + query.size();
      seg.match_cost = w.cost.value();
      seg.length_cost = cfg.kappa_len / static_cast<double>(len);
      seg.candidate_count = w.candidates;
      current.push_back(seg);
      visit(pos + len, total + seg.cost());
      current.pop_back();
    }
  };
  visit(0, 0.0);

  if (!have_best) {
    bool l = false, r = false;
    throw NoMatchError(describe(oracle_query(edit, ctx, 0, 1, l, r)));
  }
  return best;
}

}  // namespace phonosynth
