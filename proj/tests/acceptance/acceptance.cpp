// Acceptance run: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails. Pass criterion names as arguments to run
// a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "phonosynth/datagen.hpp"
#include "phonosynth/errors.hpp"
#include "phonosynth/pipeline.hpp"
#include "phonosynth/session.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/random_instances.hpp"

using namespace phonosynth;
using phonosynth::testing::lexicon;
using phonosynth::testing::random_instance;
using phonosynth::testing::table;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::size_t instances = 0, compared = 0, parity = 0, mismatches = 0;
  while (compared < 200 || instances < 300) {
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
    ++instances;
    if (fast.has_value() != slow.has_value()) {
      ++mismatches;
    } else if (fast) {
      ++compared;
      if (fast->total_cost != slow->total_cost) ++mismatches;
    } else {
      ++parity;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && compared >= 200 && secs < 600.0,
          std::to_string(compared) + " finite optima equal, " + std::to_string(parity) + " no-match agreements, " +
              std::to_string(mismatches) + " mismatches in " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------

Outcome search_scaling() {
  SynthSpec spec;
  spec.duration_s = 3600.0;
  const RepositoryBundle repo = gen_repository(spec, table());
  const BigramIndex idx = build_index(repo, table());
  // Edits are fresh speech over the same vocabulary.
  const SynthScript speech =
      sample_script(spec, table(), 4242, 60.0, std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13}, 0);
  auto edit_of = [&](std::size_t n, std::size_t offset) {
    std::vector<Token> toks;
    const double t0 = speech.phonemes[offset].start_s;
    for (std::size_t i = 0; i < n; ++i) {
      const Token& t = speech.phonemes[offset + i];
      toks.push_back(phoneme(t.name, t.start_s - t0, t.end_s - t0));
    }
    return TokenSequence(std::move(toks));
  };
  auto time_edit = [&](std::size_t n) {
    // Mean over several different edits of this length.
    constexpr int kReps = 6;
    double total = 0.0;
    for (int r = 0; r < kReps; ++r) {
      const TokenSequence e = edit_of(n, static_cast<std::size_t>(r) * 60);
      const auto t0 = Clock::now();
      optimal_partition(e, {}, repo, idx, table(), CostConfig{});
      total += seconds_since(t0);
    }
    return total / kReps;
  };
  const std::vector<double> lengths = {4, 15, 25, 39, 49};
  std::vector<double> times;
  for (double n : lengths) times.push_back(time_edit(static_cast<std::size_t>(n)));
  const double t20 = time_edit(20);

  const double nx = static_cast<double>(lengths.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    mx += lengths[i] / nx;
    my += times[i] / nx;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    sxy += (lengths[i] - mx) * (times[i] - my);
    sxx += (lengths[i] - mx) * (lengths[i] - mx);
    syy += (times[i] - my) * (times[i] - my);
  }
  const double r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  std::string per;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    per += (i ? ", " : "") + fmt(lengths[i], 2) + ":" + fmt(times[i] * 1000.0) + "ms";
  }
  return {r2 >= 0.9 && t20 <= 10.0,
          std::to_string(repo.tokens.size()) + " tokens; " + per + "; R^2 " + fmt(r2, 4) + "; 20 phonemes " +
              fmt(t20 * 1000.0) + " ms"};
}

// ---------------------------------------------------------------------------

Outcome substitution_fuzz() {
  std::mt19937_64 rng(777);
  std::size_t trials = 0, segments = 0, violations = 0, no_match = 0;
  while (trials < 100000) {
    auto base = random_instance(rng, 300, 8);
    const BigramIndex idx = build_index(base.repo, table());
    for (int k = 0; k < 100 && trials < 100000; ++k, ++trials) {
      auto probe = random_instance(rng, 20, 12);
      CostConfig cfg;
      cfg.kappa_len = std::uniform_real_distribution<double>(0.0, 50.0)(rng);
      cfg.max_segment_len = std::uniform_int_distribution<int>(1, 8)(rng);
      try {
        const PartitionResult p = optimal_partition(probe.edit, probe.ctx, base.repo, idx, table(), cfg);
        for (const SegmentMatch& s : p.segments) {
          ++segments;
          const std::size_t limit = s.gesture ? base.repo.gestures.size() : base.repo.tokens.size();
          if (s.query_size() != s.match_size() || s.repo_end > limit) ++violations;
        }
      } catch (const NoMatchError&) {
        ++no_match;
      }
    }
  }
  return {violations == 0, std::to_string(trials) + " trials, " + std::to_string(segments) + " segments, " +
                               std::to_string(no_match) + " no-match, " + std::to_string(violations) + " violations"};
}

// ---------------------------------------------------------------------------

const EngineContext& fixture_engine() {
  static const EngineContext ctx = [] {
    SynthSpec spec;
    spec.duration_s = 60.0;
    spec.target_duration_s = 30.0;
    EngineContext c;
    c.table = table();
    c.lexicon = lexicon();
    c.target = gen_target(spec, table());
    for (const auto& [name, gain] : std::vector<std::pair<std::string, double>>{
             {"neutral", 1.0}, {"energetic", 1.5}, {"mumble", 0.6}}) {
      c.styles[name] = StyleRepository::make(gen_repository(spec_for_style(spec, {name, gain, 1}), table()), table());
    }
    ModelConfig mc;
    mc.hidden = 32;
    c.model = std::make_shared<RetargetModel>(RetargetModel::initialize(mc));
    return c;
  }();
  return ctx;
}

// Random phrases from the lexicon.
std::vector<std::string> phrases(std::size_t count, std::uint64_t seed) {
  std::vector<std::string> words;
  std::ifstream f(phonosynth::testing::config_dir() / "lexicon.dict");
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == ';') continue;
    words.push_back(line.substr(0, line.find(' ')));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1), len(1, 5);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string p;
    const std::size_t n = len(rng);
    for (std::size_t w = 0; w < n; ++w) p += (w ? " " : "") + words[pick(rng)];
    out.push_back(p);
  }
  return out;
}

SynthesisRequest make_request(const std::string& text, const std::string& style, std::size_t slot) {
  const EngineContext& e = fixture_engine();
  SynthesisRequest r;
  r.edit = parse_edit_script(text, e.lexicon, e.table);
  r.style = style;
  const std::size_t n = e.target.tokens.size();
  const std::size_t b = (slot * 37) % (n - 4);
  r.location = EditLocation{b, b + slot % 4};
  return r;
}

Outcome closure_property() {
  const EngineContext& e = fixture_engine();
  const RepositoryBundle& repo = e.style("neutral").bundle;
  std::size_t edits = 0, onsets = 0, bad_onsets = 0, modified = 0;
  std::size_t slot = 0;
  for (const std::string& text : phrases(400, 31)) {
    const SynthesisRequest req = make_request(text, "neutral", slot++);
    bool has_closure = false;
    for (const Token& t : req.edit.tokens) has_closure |= e.table.is_closure(t.name);
    if (!has_closure) continue;
    const SearchContext sc = context_for(e.target, req.edit.tokens, req.location);
    PartitionResult part;
    try {
      part = optimal_partition(req.edit.tokens, sc, repo, e.style("neutral").index, e.table, req.cost);
    } catch (const NoMatchError&) {
      continue;
    }
    ++edits;
    const StitchResult st = stitch(part, req.edit.tokens, sc, repo, e.table, req.stitch);
    const EditTimeline tl = EditTimeline::of(req.edit.tokens, repo.track.fps);
    for (std::size_t i = 0; i < req.edit.tokens.size(); ++i) {
      if (!e.table.is_closure(req.edit.tokens[i].name)) continue;
      const std::ptrdiff_t onset = tl.first_frame_at(req.edit.tokens[i].start_s);
      if (onset < 0 || onset >= static_cast<std::ptrdiff_t>(st.track.size())) continue;
      ++onsets;
      bool hit = false;
      for (std::size_t x : repo.closed_mouth_exemplars) {
        hit |= st.track.frames[static_cast<std::size_t>(onset)] == repo.track.frames[x];
      }
      if (!hit) ++bad_onsets;
    }
    // Closure length 0: the stitched track is the blended one, untouched.
    StitchConfig off = req.stitch;
    off.closure_frames = 0;
    std::vector<Fragment> frags;
    for (std::size_t s = 0; s < part.segments.size(); ++s) {
      frags.push_back(retime_segment(part.segments[s], s, req.edit.tokens, sc, repo, tl));
    }
    const StitchResult blended = blend_and_smooth(frags, part, req.edit.tokens, tl, off);
    const StitchResult zero = stitch(part, req.edit.tokens, sc, repo, e.table, off);
    if (!(zero.track == blended.track) || !zero.trace.closures.empty()) ++modified;
    if (edits >= 150) break;
  }
  return {edits >= 100 && bad_onsets == 0 && modified == 0,
          std::to_string(edits) + " edits, " + std::to_string(onsets) + " closure onsets, " +
              std::to_string(bad_onsets) + " not on an exemplar; length 0 modified " + std::to_string(modified) +
              " tracks"};
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  ModelConfig mc;
  mc.hidden = 16;
  mc.seed = 11;
  mc.output_init_scale = 1.0;
  NetworkParams<double> p = RetargetModel::initialize(mc).network().params().cast<double>();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.05), x(0.0, 0.5);
  for (int l = 0; l < kLayers; ++l) {
    for (Eigen::Index k = 0; k < p.b[l].size(); ++k) p.b[l](k) = n(rng);
  }
  std::vector<Eigen::MatrixXd> s, t;
  for (int i = 0; i < 7; ++i) {
    Eigen::MatrixXd a(64, 3), b(64, 3);
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      a.data()[k] = x(rng);
      b.data()[k] = x(rng);
    }
    s.push_back(a);
    t.push_back(b);
  }
  const auto r = phonosynth::testing::gradient_check(mc.shape(), p, s, t, 10.0);
  const double secs = seconds_since(t0);
  return {r.max_relative_error < 1e-4 && secs < 60.0 && r.checked > 0,
          "max relative error " + fmt(r.max_relative_error) + " over " + std::to_string(r.checked) +
              " parameters (" + std::to_string(r.skipped) + " on kinks skipped), " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------

Outcome retargeting_recovery() {
  SynthSpec spec;
  spec.duration_s = 60.0;
  spec.target_duration_s = 150.0;
  spec.noise_sigma = 0.01;
  const RepositoryBundle repo = gen_repository(spec, table());
  const TargetClip target = gen_target(spec, table());
  const ModelConfig mc;  // 1024 hidden units, H = 2, T = 7
  TrainConfig tc;        // 100 epochs
  const auto t0 = Clock::now();
  const TrainResult tr = train_retargeting(repo, target, table(), mc, tc);
  const double secs = seconds_since(t0);

  const HeldOutProbe probe = held_out_probe(spec, table(), 60.0, 9001);
  const ExpressionTrack pred = infer(tr.model, probe.source);
  double err = 0.0, base = 0.0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    for (std::size_t c = 0; c < kExpressionDim; ++c) {
      err += std::abs(static_cast<double>(pred.frames[f][c]) - probe.truth.frames[f][c]);
      base += std::abs(static_cast<double>(probe.source.frames[f][c]) - probe.truth.frames[f][c]);
    }
  }
  const double denom = static_cast<double>(pred.size() * kExpressionDim);
  err /= denom;
  base /= denom;
  return {err < 0.05 && secs < 1800.0 && tr.loss_history.size() <= 100,
          "held-out mean L1 " + fmt(err, 4) + " (identity " + fmt(base, 4) + ") after " +
              std::to_string(tr.loss_history.size()) + " epochs, training " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------

// Mean L2 norm of the second difference of the model's per-window outputs.
double mean_acceleration(const RetargetModel& m, const std::vector<CorrespondencePair>& pairs,
                         const std::vector<WindowRef>& windows) {
  using Matrix = Network<float>::Matrix;
  double sum = 0.0;
  std::size_t count = 0;
  const auto T = static_cast<std::size_t>(m.config().window);
  for (std::size_t w = 0; w < windows.size(); w += 5) {
    const auto& p = pairs[windows[w].pair];
    std::vector<Matrix> s;
    for (std::size_t i = 0; i < T; ++i) {
      s.push_back(Eigen::Map<const Eigen::VectorXf>(p.source[windows[w].offset + i].values.data(), 64));
    }
    const auto y = m.network().forward(s);
    for (std::size_t i = 1; i + 1 < T; ++i) {
      sum += (y[i + 1] - 2.0f * y[i] + y[i - 1]).norm();
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

Outcome loss_identities() {
  using M = Eigen::MatrixXd;
  std::vector<M> lin;
  for (int i = 0; i < 7; ++i) {
    M m(64, 4);
    for (Eigen::Index r = 0; r < 64; ++r) {
      for (Eigen::Index c = 0; c < 4; ++c) m(r, c) = 0.37 * (r + 1) - 0.011 * (c + 2) * i;
    }
    lin.push_back(m);
  }
  const double zero = window_loss<double>(lin, lin, 10.0).total();

  SynthSpec spec;
  spec.duration_s = 40.0;
  spec.target_duration_s = 60.0;
  const RepositoryBundle repo = gen_repository(spec, table());
  const TargetClip target = gen_target(spec, table());
  const CorrespondenceSet corr = build_correspondences(repo, target.tokens, target.track, table(), CostConfig{});
  ModelConfig mc;
  mc.hidden = 64;
  TrainConfig tc;
  tc.max_epochs = 15;
  tc.learning_rate = 1e-3;
  const auto windows = training_windows(corr.pairs, mc.window);
  double acc[2];
  const double lambdas[2] = {0.0, 10.0};
  for (int k = 0; k < 2; ++k) {
    tc.lambda = lambdas[k];
    ModelConfig m = mc;
    m.lambda = lambdas[k];
    acc[k] = mean_acceleration(train(corr.pairs, RetargetModel::initialize(m), tc).model, corr.pairs, windows);
  }
  return {std::abs(zero) < 1e-12 && acc[1] < acc[0],
          "linear perfect prediction loss " + fmt(zero) + "; mean output acceleration lambda=0 " + fmt(acc[0], 4) +
              ", lambda=10 " + fmt(acc[1], 4)};
}

// ---------------------------------------------------------------------------

Outcome style_invariance() {
  const EngineContext& e = fixture_engine();
  const ExpressionVector rest = make_world(SynthSpec{}, table()).rest;
  std::size_t edits = 0, changed = 0, checksum_drift = 0, order_ok = 0;
  std::size_t slot = 0;
  for (const std::string& text : phrases(60, 77)) {
    SynthesisResult r[3];
    const char* styles[3] = {"neutral", "energetic", "mumble"};
    try {
      for (int k = 0; k < 3; ++k) r[k] = synthesize(e, make_request(text, styles[k], slot));
    } catch (const NoMatchError&) {
      continue;
    }
    ++slot;
    ++edits;
    if (r[0].model_checksum != r[1].model_checksum || r[0].model_checksum != r[2].model_checksum ||
        r[0].model_checksum != e.model->checksum()) {
      ++checksum_drift;
    }
    if (!(r[0].stitched == r[1].stitched) && !(r[0].stitched == r[2].stitched)) ++changed;
    const double dn = mean_deviation_from_rest(r[0].stitched, rest);
    if (mean_deviation_from_rest(r[1].stitched, rest) > dn && mean_deviation_from_rest(r[2].stitched, rest) < dn) {
      ++order_ok;
    }
  }
  return {edits >= 40 && checksum_drift == 0 && changed == edits && order_ok == edits,
          std::to_string(edits) + " edits: outputs changed " + std::to_string(changed) + ", checksum drift " +
              std::to_string(checksum_drift) + ", energetic > neutral > mumble in " + std::to_string(order_ok)};
}

// ---------------------------------------------------------------------------

Outcome gesture_retrieval() {
  std::size_t checks = 0, wrong = 0, foreign = 0;
  auto check_repo = [&](const RepositoryBundle& repo, const std::vector<double>& durations) {
    const BigramIndex idx = build_index(repo, table());
    for (auto name : kGestureNames) {
      for (double d : durations) {
        const TokenSequence edit({gesture(std::string(name), 0.0, d)});
        double best = std::numeric_limits<double>::infinity();
        for (const Token& g : repo.gestures) {
          if (g.name == name) best = std::min(best, std::abs(g.duration() - d));
        }
        try {
          const PartitionResult p = optimal_partition(edit, {}, repo, idx, table(), CostConfig{});
          ++checks;
          const Token& got = repo.gestures[p.segments[0].repo_begin];
          if (got.name != name) ++foreign;
          if (std::abs(std::abs(got.duration() - d) - best) > 1e-12) ++wrong;
        } catch (const NoMatchError&) {
          if (std::isfinite(best)) ++wrong;
        }
      }
    }
  };
  SynthSpec spec;
  spec.duration_s = 300.0;
  spec.gestures_per_name = 5;
  std::vector<double> durations;
  for (int k = 1; k <= 60; ++k) durations.push_back(0.05 * k);
  check_repo(gen_repository(spec, table()), durations);

  // Random repositories and mixed edits: gesture segments only ever match
  // their own name.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3000; ++trial) {
    auto inst = random_instance(rng, 200, 8);
    const BigramIndex idx = build_index(inst.repo, table());
    try {
      const PartitionResult p = optimal_partition(inst.edit, inst.ctx, inst.repo, idx, table(), CostConfig{});
      for (const SegmentMatch& s : p.segments) {
        if (!s.gesture) continue;
        ++checks;
        const Token& want = inst.edit[s.core_begin];
        const Token& got = inst.repo.gestures[s.repo_begin];
        if (got.name != want.name) ++foreign;
        double best = std::numeric_limits<double>::infinity();
        for (const Token& g : inst.repo.gestures) {
          if (g.name == want.name) best = std::min(best, std::abs(g.duration() - want.duration()));
        }
        if (std::abs(std::abs(got.duration() - want.duration()) - best) > 1e-12) ++wrong;
      }
    } catch (const NoMatchError&) {
    }
  }
  return {wrong == 0 && foreign == 0 && checks > 0,
          std::to_string(checks) + " gesture matches checked, " + std::to_string(wrong) + " not duration-closest, " +
              std::to_string(foreign) + " with a foreign name"};
}

// ---------------------------------------------------------------------------

Outcome determinism() {
  // Two sessions built from scratch: datagen, training, synthesis.
  phonosynth::testing::TempDir dir;
  auto build = [&](const std::string& tag) {
    SynthSpec spec;
    spec.duration_s = 40.0;
    spec.target_duration_s = 40.0;
    const auto base = dir.path() / tag;
    std::filesystem::create_directories(base);
    save_bundle(gen_repository(spec, table()), base / "neutral.json");
    save_target(gen_target(spec, table()), base / "target.json");
    SessionSpec s;
    s.target = base / "target.json";
    s.repositories = {{"neutral", base / "neutral.json"}};
    s.visemes = phonosynth::testing::config_dir() / "visemes.tsv";
    s.lexicon = phonosynth::testing::config_dir() / "lexicon.dict";
    s.engine.model.hidden = 48;
    s.engine.train.max_epochs = 3;
    SessionStore store(base / "sessions");
    auto session = store.create(s);
    EditRequest req;
    req.text = "the big brown fox jumps over the lazy dog";
    req.location = EditLocation{5, 9};
    const std::string id = session->synthesize_edit(req);
    return session->result(id);
  };
  const auto a = build("a");
  const auto b = build("b");
  const bool same = a->id == b->id && a->track == b->track && a->stitched == b->stitched && a->trace == b->trace &&
                    a->partition == b->partition && a->full == b->full && a->model_checksum == b->model_checksum;
  return {same, std::string(same ? "identical" : "different") + " results " + a->id + " / " + b->id + ", " +
                    std::to_string(a->track.size()) + " frames"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"search-oracle-equivalence", oracle_equivalence},
      {"search-scaling", search_scaling},
      {"substitution-only", substitution_fuzz},
      {"closure-property", closure_property},
      {"gradient-check", gradient_check},
      {"retargeting-recovery", retargeting_recovery},
      {"loss-identities", loss_identities},
      {"style-invariance", style_invariance},
      {"gesture-retrieval", gesture_retrieval},
      {"determinism", determinism},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
