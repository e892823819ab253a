#include <algorithm>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "phonosynth/errors.hpp"
#include "phonosynth/search.hpp"

namespace phonosynth {

namespace {

struct Candidate {
  Cost cost = Cost::no_match();
  std::size_t repo_begin = 0;
  std::size_t candidates = 0;
};

// Best substitution-only match for one coded query. Candidates come from the
// index; ties keep the earliest repository position.
Candidate best_match(std::span<const CodedToken> query, const BigramIndex& index, const CostConfig& cfg) {
  Candidate best;
  if (query.size() == 1 && query[0].gesture) {
    const auto gestures = index.gestures();
    for (std::uint32_t g : index.lookup_gesture(query[0].viseme)) {
      ++best.candidates;
      const Cost c = substitution_cost(query[0], gestures[g], cfg);
      if (c < best.cost) {
        best.cost = c;
        best.repo_begin = g;
      }
    }
    return best;
  }
  for (const CodedToken& q : query) {
    if (q.gesture) return best;
  }

  const auto repo = index.repository();
  const std::size_t len = query.size();
  const auto positions =
      len >= 2 ? index.lookup(query[0].viseme, query[1].viseme) : index.lookup_unigram(query[0].viseme);
  for (std::uint32_t p : positions) {
    if (p + len > repo.size()) continue;
    ++best.candidates;
    double sum = 0.0;
    bool pruned = false;
    for (std::size_t k = 0; k < len; ++k) {
      sum += substitution_cost(query[k], repo[p + k], cfg).value();
      // Costs are non-negative, so a partial sum above the best cannot win.
      if (best.cost.is_match() && sum > best.cost.value()) {
        pruned = true;
        break;
      }
    }
    if (pruned) continue;
    const Cost c(sum);
    if (c < best.cost) {
      best.cost = c;
      best.repo_begin = p;
    }
  }
  return best;
}

std::string memo_key(std::span<const CodedToken> query) {
  std::string key;
  key.reserve(query.size() * 17);
  for (const CodedToken& q : query) {
    char buf[17];
    std::memcpy(buf, &q.name, 4);
    std::memcpy(buf + 4, &q.viseme, 4);
    std::memcpy(buf + 8, &q.duration, 8);
    buf[16] = q.gesture ? 1 : 0;
    key.append(buf, sizeof buf);
  }
  return key;
}

bool usable_context(const Token& t) { return !t.is_gesture(); }

}  // namespace

std::vector<Token> expanded_query(const TokenSequence& edit, const SearchContext& ctx, std::size_t begin,
                                  std::size_t end, bool* left_used, bool* right_used) {
  std::vector<Token> q;
  bool core_has_gesture = false;
  for (std::size_t i = begin; i < end; ++i) core_has_gesture |= edit[i].is_gesture();

  const Token* left = nullptr;
  const Token* right = nullptr;
  if (!core_has_gesture) {
    if (begin > 0) {
      if (usable_context(edit[begin - 1])) left = &edit[begin - 1];
    } else if (ctx.left && usable_context(*ctx.left)) {
      left = &*ctx.left;
    }
    if (end < edit.size()) {
      if (usable_context(edit[end])) right = &edit[end];
    } else if (ctx.right && usable_context(*ctx.right)) {
      right = &*ctx.right;
    }
  }
  if (left) q.push_back(*left);
  for (std::size_t i = begin; i < end; ++i) q.push_back(edit[i]);
  if (right) q.push_back(*right);
  if (left_used) *left_used = left != nullptr;
  if (right_used) *right_used = right != nullptr;
  return q;
}

PartitionResult optimal_partition(const TokenSequence& edit, const SearchContext& ctx, const RepositoryBundle& repo,
                                  const BigramIndex& index, const VisemeTable& table, const CostConfig& cfg,
                                  const SearchOptions& options) {
  (void)repo;
  cfg.validate();
  if (edit.empty()) throw InvalidEditError("empty edit");
  const std::size_t m = edit.size();
  const auto max_len = static_cast<std::size_t>(cfg.max_segment_len);

  std::unordered_map<std::string, Candidate> memo;

  struct State {
    Cost cost = Cost::no_match();
    std::size_t segments = 0;
    SegmentMatch last;
    std::size_t prev = 0;
    std::vector<std::pair<std::size_t, std::size_t>> order;  // (repo_begin, core_end) per segment
  };
  std::vector<State> best(m + 1);
  best[0].cost = Cost(0.0);

  std::vector<CodedToken> coded;
  for (std::size_t j = 1; j <= m; ++j) {
    for (std::size_t len = 1; len <= std::min(max_len, j); ++len) {
      const std::size_t i = j - len;
      if (!best[i].cost.is_match()) continue;
      bool has_gesture = false;
      for (std::size_t k = i; k < j; ++k) has_gesture |= edit[k].is_gesture();
      if (has_gesture && len > 1) continue;

      bool left_used = false, right_used = false;
      const std::vector<Token> query = expanded_query(edit, ctx, i, j, &left_used, &right_used);
      coded.clear();
      for (const Token& t : query) coded.push_back(index.code(t, table));

      Candidate cand;
      if (options.memoize) {
        std::string key = memo_key(coded);
        const auto it = memo.find(key);
        if (it != memo.end()) {
          cand = it->second;
        } else {
          cand = best_match(coded, index, cfg);
          memo.emplace(std::move(key), cand);
        }
      } else {
        cand = best_match(coded, index, cfg);
      }
      if (!cand.cost.is_match()) continue;

      SegmentMatch seg;
      seg.core_begin = i;
      seg.core_end = j;
      seg.left_context = left_used;
      seg.right_context = right_used;
      seg.gesture = has_gesture;
      seg.repo_begin = cand.repo_begin;
      seg.repo_end = cand.repo_begin + query.size();
      seg.match_cost = cand.cost.value();
      seg.length_cost = cfg.kappa_len / static_cast<double>(len);
      seg.candidate_count = cand.candidates;

      const Cost total = best[i].cost + Cost(seg.cost());
      const std::size_t segments = best[i].segments + 1;
      State& s = best[j];
      std::vector<std::pair<std::size_t, std::size_t>> order = best[i].order;
      order.emplace_back(seg.repo_begin, seg.core_end);
      // Equal cost: fewer segments, then earlier repository positions read
      // left to right.
      if (total < s.cost || (total == s.cost && (segments < s.segments || (segments == s.segments && order < s.order)))) {
        s.cost = total;
        s.segments = segments;
        s.last = seg;
        s.prev = i;
        s.order = std::move(order);
      }
    }
  }

  if (!best[m].cost.is_match()) {
    std::size_t j = 1;
    while (j <= m && best[j].cost.is_match()) ++j;
    const std::vector<Token> q = expanded_query(edit, ctx, j - 1, j);
    throw NoMatchError(describe(q));
  }

  PartitionResult result;
  result.total_cost = best[m].cost.value();
  for (std::size_t j = m; j > 0; j = best[j].prev) result.segments.push_back(best[j].last);
  std::reverse(result.segments.begin(), result.segments.end());
  return result;
}

}  // namespace phonosynth
