#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "phonosynth/datagen.hpp"
#include "phonosynth/errors.hpp"
#include "phonosynth/search.hpp"
#include "support/fixtures.hpp"
#include "support/random_instances.hpp"

using namespace phonosynth;
using phonosynth::testing::contiguous;
using phonosynth::testing::make_repo;
using phonosynth::testing::random_instance;
using phonosynth::testing::table;

namespace {

void check_partition_invariants(const PartitionResult& p, const TokenSequence& edit, const SearchContext& ctx,
                                const CostConfig& cfg) {
  REQUIRE_FALSE(p.segments.empty());
  std::size_t expect = 0;
  double total = 0.0;
  for (const SegmentMatch& s : p.segments) {
    CHECK(s.core_begin == expect);
    CHECK(s.core_end > s.core_begin);
    CHECK(s.core_size() <= static_cast<std::size_t>(cfg.max_segment_len));
    CHECK(s.query_size() == s.match_size());
    bool l = false, r = false;
    const auto q = expanded_query(edit, ctx, s.core_begin, s.core_end, &l, &r);
    CHECK(l == s.left_context);
    CHECK(r == s.right_context);
    CHECK(q.size() == s.query_size());
    CHECK(s.length_cost == doctest::Approx(cfg.kappa_len / static_cast<double>(s.core_size())));
    total += s.cost();
    expect = s.core_end;
  }
  CHECK(expect == edit.size());
  CHECK(p.total_cost == doctest::Approx(total));
}

std::size_t inverse_length_sum_x1000(const PartitionResult& p) {
  double s = 0.0;
  for (const auto& seg : p.segments) s += 1.0 / static_cast<double>(seg.core_size());
  return static_cast<std::size_t>(std::llround(s * 1000.0));
}

}  // namespace

TEST_CASE("substitution cost examples") {
  const CostConfig cfg;
  const VisemeTable& t = table();
  CHECK(substitution_cost(phoneme("AA1", 0, 0.1), phoneme("AA1", 0.5, 0.6), cfg, t).value() == doctest::Approx(0.0));
  const Cost mb = substitution_cost(phoneme("M", 0, 0.10), phoneme("B", 0, 0.15), cfg, t);
  REQUIRE(mb.is_match());
  CHECK(mb.value() == doctest::Approx(1.2));
  CHECK_FALSE(substitution_cost(gesture("teeth_smile", 0, 0.5), phoneme("AH0", 0, 0.5), cfg, t).is_match());
  CHECK_FALSE(substitution_cost(gesture("teeth_smile", 0, 0.5), gesture("sad", 0, 0.5), cfg, t).is_match());
  const Cost gg = substitution_cost(gesture("sad", 0, 0.5), gesture("sad", 0, 0.75), cfg, t);
  REQUIRE(gg.is_match());
  CHECK(gg.value() == doctest::Approx(1.0));
  // Stress is part of the label.
  CHECK(substitution_cost(phoneme("AH0", 0, 0.1), phoneme("AH1", 0, 0.1), cfg, t).value() == doctest::Approx(1.0));
}

TEST_CASE("coded substitution cost agrees with the token form") {
  std::mt19937_64 rng(11);
  const CostConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(rng, 60, 8);
    const BigramIndex idx = build_index(inst.repo, table());
    const auto repo = inst.repo.tokens.tokens();
    for (const Token& w : inst.edit) {
      for (std::size_t p = 0; p < repo.size(); ++p) {
        const Cost a = substitution_cost(w, repo[p], cfg, table());
        const Cost b = substitution_cost(idx.code(w, table()), idx.repository()[p], cfg);
        CHECK(a == b);
      }
    }
  }
}

TEST_CASE("match cost examples") {
  const CostConfig cfg;
  const TokenSequence a = contiguous({"M", "AA1", "S"});
  const TokenSequence b = contiguous({"M", "AA1", "F"});
  CHECK(match_cost(a.tokens(), a.tokens(), cfg, table()) == Cost(0.0));
  const Cost c = match_cost(a.tokens(), b.tokens(), cfg, table());
  REQUIRE(c.is_match());
  CHECK(c.value() == doctest::Approx(11.0));
  const std::vector<Token> g = {phoneme("M", 0, 0.1), gesture("sad", 0.1, 0.6)};
  const std::vector<Token> h = {phoneme("M", 0, 0.1), phoneme("AA1", 0.1, 0.6)};
  CHECK_FALSE(match_cost(g, h, cfg, table()).is_match());
  CHECK_THROWS_AS(match_cost(a.tokens(), a.tokens().subspan(1), cfg, table()), ShapeError);
}

TEST_CASE("cost config validation") {
  CostConfig c;
  c.max_segment_len = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.c_time = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("index: two-token repository has one key") {
  const RepositoryBundle repo = make_repo({"M", "AA1"});
  const BigramIndex idx = build_index(repo, table());
  const auto hits = idx.lookup(table().closure_class(), table().viseme_of("AA1"));
  REQUIRE(hits.size() == 1);
  CHECK(hits[0] == 0);
  CHECK(idx.bigram_entry_count() == 1);
  CHECK_THROWS_AS(build_index(make_repo({"M"}), table()), Error);
}

TEST_CASE("index: repeated bi-gram listed at every position, sorted") {
  const RepositoryBundle repo = make_repo({"M", "AA1", "S", "B", "AH0", "M", "AA1", "P", "AA1"});
  const BigramIndex idx = build_index(repo, table());
  const auto hits = idx.lookup(table().closure_class(), table().viseme_of("AA1"));
  const std::vector<std::uint32_t> got(hits.begin(), hits.end());
  CHECK(got == std::vector<std::uint32_t>{0, 3, 5, 7});
}

TEST_CASE("index: datagen 50k-token repository matches a linear scan") {
  SynthSpec spec;
  spec.duration_s = 50000.0 / spec.phoneme_rate;
  const RepositoryBundle repo = gen_repository(spec, table());
  const std::size_t n = repo.tokens.size();
  CHECK(n >= 49000);
  const BigramIndex idx = build_index(repo, table());
  CHECK(idx.size() == n - 1 + repo.gestures.size());
  const int k = table().class_count();
  std::vector<std::vector<std::uint32_t>> scan(static_cast<std::size_t>(k * k));
  for (std::size_t p = 0; p + 1 < n; ++p) {
    const int a = table().viseme_of(repo.tokens[p]);
    const int b = table().viseme_of(repo.tokens[p + 1]);
    scan[static_cast<std::size_t>(a * k + b)].push_back(static_cast<std::uint32_t>(p));
  }
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      const auto hits = idx.lookup(a, b);
      CHECK(std::vector<std::uint32_t>(hits.begin(), hits.end()) == scan[static_cast<std::size_t>(a * k + b)]);
    }
  }
  // Gestures sit under their own singleton classes.
  for (std::size_t g = 0; g < repo.gestures.size(); ++g) {
    const auto hits = idx.lookup_gesture(table().viseme_of(repo.gestures[g]));
    CHECK(std::find(hits.begin(), hits.end(), g) != hits.end());
  }
}

TEST_CASE("exact repository stretch is matched by one segment") {
  const std::vector<std::string> names = {"S", "IY1", "K", "W", "AA1", "F", "T", "UW1", "D", "AH0", "N", "L"};
  const RepositoryBundle repo = make_repo(names);
  const BigramIndex idx = build_index(repo, table());
  // Edit = tokens 3..7 with the repository neighbours as context.
  const TokenSequence edit = contiguous({"W", "AA1", "F", "T", "UW1"});
  SearchContext ctx;
  ctx.left = phoneme("K", -0.1, 0.0);
  ctx.right = phoneme("D", 0.5, 0.6);
  const CostConfig cfg;
  const PartitionResult p = optimal_partition(edit, ctx, repo, idx, table(), cfg);
  REQUIRE(p.segments.size() == 1);
  CHECK(p.segments[0].match_cost == doctest::Approx(0.0));
  CHECK(p.segments[0].repo_begin == 2);
  CHECK(p.total_cost == doctest::Approx(cfg.kappa_len / 5.0));
}

TEST_CASE("no-match reports the offending query") {
  const RepositoryBundle repo = make_repo({"M", "AA1", "S", "AA1"});
  const BigramIndex idx = build_index(repo, table());
  const TokenSequence edit = contiguous({"F", "IY1"});
  try {
    optimal_partition(edit, {}, repo, idx, table(), CostConfig{});
    FAIL("expected NoMatchError");
  } catch (const NoMatchError& e) {
    CHECK(e.query().find("F") != std::string::npos);
  }
  CHECK_THROWS_AS(optimal_partition(TokenSequence{}, {}, repo, idx, table(), CostConfig{}), InvalidEditError);
}

TEST_CASE("oracle: single token, L=1, hand enumeration on a five-token repository") {
  const RepositoryBundle repo = make_repo({"S", "AA1", "M", "AH0", "S"});
  const TokenSequence edit({phoneme("AA1", 0.0, 0.1)});
  SearchContext ctx;
  ctx.left = phoneme("S", -0.1, 0.0);
  ctx.right = phoneme("S", 0.1, 0.2);
  CostConfig cfg;
  cfg.max_segment_len = 1;
  // Query S AA1 S. Constrained, only [S AA1 M] shares the leading bi-gram:
  // 0 + 0 + (1 + 10) = 11. Unconstrained, [M AH0 S] costs 11 + 1 + 0 = 12.
  const PartitionResult c = brute_force_oracle(edit, ctx, repo, table(), cfg);
  REQUIRE(c.segments.size() == 1);
  CHECK(c.segments[0].repo_begin == 0);
  CHECK(c.segments[0].match_cost == doctest::Approx(11.0));
  CHECK(c.total_cost == doctest::Approx(31.0));
  OracleOptions free;
  free.constrained = false;
  const PartitionResult u = brute_force_oracle(edit, ctx, repo, table(), cfg, free);
  CHECK(u.total_cost == c.total_cost);
  CHECK(u.segments[0].repo_begin == 0);
  CHECK(u.segments[0].candidate_count == 3);
  CHECK(c.segments[0].candidate_count == 1);
  const BigramIndex idx = build_index(repo, table());
  CHECK(optimal_partition(edit, ctx, repo, idx, table(), cfg) == c);
}

TEST_CASE("oracle size guard") {
  std::mt19937_64 rng(5);
  auto inst = random_instance(rng, 300, 8);
  std::vector<Token> long_edit;
  for (int i = 0; i < 13; ++i) long_edit.push_back(phoneme("AA1", 0.1 * i, 0.1 * (i + 1)));
  CHECK_THROWS_AS(brute_force_oracle(TokenSequence(long_edit), {}, inst.repo, table(), CostConfig{}), Error);
}

TEST_CASE("search equals the constrained oracle on random instances") {
  std::mt19937_64 rng(2024);
  int compared = 0, no_match = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(rng, 300, 8);
    CostConfig cfg;
    cfg.kappa_len = std::uniform_real_distribution<double>(0.0, 40.0)(rng);
    cfg.max_segment_len = std::uniform_int_distribution<int>(1, 6)(rng);
    const BigramIndex idx = build_index(inst.repo, table());
    std::optional<PartitionResult> fast, slow;
    try {
      fast = optimal_partition(inst.edit, inst.ctx, inst.repo, idx, table(), cfg);
    } catch (const NoMatchError&) {
    }
    try {
      slow = brute_force_oracle(inst.edit, inst.ctx, inst.repo, table(), cfg);
    } catch (const NoMatchError&) {
    }
    REQUIRE(fast.has_value() == slow.has_value());
    if (!fast) {
      ++no_match;
      continue;
    }
    ++compared;
    CHECK(fast->total_cost == slow->total_cost);
    CHECK(*fast == *slow);
    check_partition_invariants(*fast, inst.edit, inst.ctx, cfg);
    OracleOptions free;
    free.constrained = false;
    CHECK(brute_force_oracle(inst.edit, inst.ctx, inst.repo, table(), cfg, free).total_cost <= slow->total_cost);
  }
  CHECK(compared >= 100);
  MESSAGE("compared " << compared << ", both no-match " << no_match);
}

TEST_CASE("memoization is transparent") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    auto inst = random_instance(rng, 300, 12);
    const BigramIndex idx = build_index(inst.repo, table());
    SearchOptions off;
    off.memoize = false;
    try {
      const auto a = optimal_partition(inst.edit, inst.ctx, inst.repo, idx, table(), CostConfig{});
      CHECK(a == optimal_partition(inst.edit, inst.ctx, inst.repo, idx, table(), CostConfig{}, off));
    } catch (const NoMatchError&) {
      CHECK_THROWS_AS(optimal_partition(inst.edit, inst.ctx, inst.repo, idx, table(), CostConfig{}, off), NoMatchError);
    }
  }
}

TEST_CASE("raising kappa_len never adds segments on edits up to 7 tokens") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = random_instance(rng, 300, 7);
    const BigramIndex idx = build_index(inst.repo, table());
    CostConfig cfg;
    std::optional<std::size_t> prev_count, prev_inv;
    for (double kappa : {0.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 200.0}) {
      cfg.kappa_len = kappa;
      PartitionResult p;
      try {
        p = optimal_partition(inst.edit, inst.ctx, inst.repo, idx, table(), cfg);
      } catch (const NoMatchError&) {
        break;
      }
      if (prev_count) {
        CHECK(p.segments.size() <= *prev_count);
        CHECK(inverse_length_sum_x1000(p) <= *prev_inv);
      }
      prev_count = p.segments.size();
      prev_inv = inverse_length_sum_x1000(p);
    }
  }
}

TEST_CASE("raising kappa_len never increases the summed inverse segment length") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 40; ++trial) {
    auto inst = random_instance(rng, 300, 16);
    const BigramIndex idx = build_index(inst.repo, table());
    CostConfig cfg;
    std::optional<std::size_t> prev;
    for (double kappa : {0.0, 5.0, 20.0, 60.0, 300.0}) {
      cfg.kappa_len = kappa;
      try {
        const PartitionResult p = optimal_partition(inst.edit, inst.ctx, inst.repo, idx, table(), cfg);
        if (prev) CHECK(inverse_length_sum_x1000(p) <= *prev);
        prev = inverse_length_sum_x1000(p);
      } catch (const NoMatchError&) {
        break;
      }
    }
  }
}

TEST_CASE("ties prefer fewer segments, then the earliest repository position") {
  // The stretch A B C appears twice; an exact match exists at both places.
  const RepositoryBundle repo = make_repo({"S", "AA1", "F", "IY1", "T", "S", "AA1", "F", "IY1", "T"});
  const BigramIndex idx = build_index(repo, table());
  const TokenSequence edit = contiguous({"AA1", "F", "IY1"});
  CostConfig cfg;
  cfg.kappa_len = 0.0;  // every partition of exact matches costs 0
  SearchContext ctx;
  ctx.left = phoneme("S", -0.1, 0.0);
  ctx.right = phoneme("T", 0.3, 0.4);
  const PartitionResult p = optimal_partition(edit, ctx, repo, idx, table(), cfg);
  REQUIRE(p.segments.size() == 1);
  CHECK(p.segments[0].repo_begin == 0);
  CHECK(p.total_cost == doctest::Approx(0.0));
}

TEST_CASE("gestures: duration-closest annotation wins, other names never match") {
  RepositoryBundle repo = make_repo({"S", "AA1", "F", "IY1", "T", "S", "AA1", "F", "IY1", "T", "M", "AH0"});
  repo.gestures = {gesture("teeth_smile", 0.0, 0.3), gesture("sad", 0.3, 0.5), gesture("teeth_smile", 0.5, 0.6),
                   gesture("teeth_smile", 0.6, 1.1)};
  const BigramIndex idx = build_index(repo, table());
  for (double d : {0.05, 0.12, 0.25, 0.31, 0.45, 0.8, 2.0}) {
    const TokenSequence edit({gesture("teeth_smile", 0.0, d)});
    const PartitionResult p = optimal_partition(edit, {}, repo, idx, table(), CostConfig{});
    REQUIRE(p.segments.size() == 1);
    const SegmentMatch& s = p.segments[0];
    CHECK(s.gesture);
    CHECK(repo.gestures[s.repo_begin].name == "teeth_smile");
    double best = 1e9;
    for (const Token& g : repo.gestures) {
      if (g.name == "teeth_smile") best = std::min(best, std::abs(g.duration() - d));
    }
    CHECK(std::abs(repo.gestures[s.repo_begin].duration() - d) == doctest::Approx(best));
  }
  CHECK_THROWS_AS(optimal_partition(TokenSequence({gesture("mouth_left", 0.0, 0.5)}), {}, repo, idx, table(), CostConfig{}),
                  NoMatchError);
}

TEST_CASE("gestures are never used as context") {
  const RepositoryBundle repo = make_repo({"S", "AA1", "F", "IY1", "T"});
  const TokenSequence edit({phoneme("AA1", 0.0, 0.1), gesture("sad", 0.1, 0.6), phoneme("F", 0.6, 0.7)});
  bool l = false, r = false;
  const auto q = expanded_query(edit, {}, 0, 1, &l, &r);
  CHECK_FALSE(r);
  CHECK(q.size() == 1);
  const auto g = expanded_query(edit, {}, 1, 2, &l, &r);
  CHECK(g.size() == 1);
  CHECK_FALSE(l);
  CHECK_FALSE(r);
}
