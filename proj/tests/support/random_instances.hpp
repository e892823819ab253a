#pragma once

#include <random>

#include "phonosynth/search.hpp"
#include "support/fixtures.hpp"

namespace phonosynth::testing {

struct SearchInstance {
  RepositoryBundle repo;
  TokenSequence edit;
  SearchContext ctx;
};

// Random repository (<= max_repo phonemes, a few gestures) and edit
// (1..max_edit tokens) over a small phoneme alphabet so that bi-grams recur.
inline SearchInstance random_instance(std::mt19937_64& rng, std::size_t max_repo = 300, std::size_t max_edit = 8,
                                      bool with_gestures = true) {
  static const std::vector<std::string> alphabet = {"M", "B", "P", "F", "T", "D", "S", "K", "AA1", "AH0", "IY1", "UW1"};
  static const std::vector<std::string> gestures = {"teeth_smile", "sad", "closed_smile"};
  std::uniform_int_distribution<std::size_t> letter(0, alphabet.size() - 1);
  std::uniform_real_distribution<double> dur(0.05, 0.15);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Quantized durations make exact cost ties common.
  auto qdur = [&] { return std::round(dur(rng) * 40.0) / 40.0; };

  SearchInstance inst;
  const std::size_t n = std::uniform_int_distribution<std::size_t>(20, max_repo)(rng);
  std::vector<Token> toks;
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (unit(rng) < 0.05) t += 0.1;
    const double d = qdur();
    toks.push_back(phoneme(alphabet[letter(rng)], t, t + d));
    t += d;
  }
  inst.repo.tokens = TokenSequence(std::move(toks));
  if (with_gestures) {
    const std::size_t g = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
    double gt = 0.0;
    const double step = t / static_cast<double>(g + 1);
    for (std::size_t i = 0; i < g; ++i) {
      gt = step * static_cast<double>(i) + 0.01;
      const double d = std::min(step * 0.9, 0.3 + unit(rng));
      inst.repo.gestures.push_back(gesture(gestures[i % gestures.size()], gt, gt + d));
    }
  }
  const auto frames = static_cast<std::size_t>(std::ceil(t * 30.0)) + 1;
  inst.repo.track = make_track(frames, 30.0, [](std::size_t f, std::size_t c) {
    return 0.01 * static_cast<double>(f % 17) + 0.001 * static_cast<double>(c);
  });

  const std::size_t m = std::uniform_int_distribution<std::size_t>(1, max_edit)(rng);
  std::vector<Token> edit;
  double e = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = qdur();
    if (with_gestures && unit(rng) < 0.1) {
      const double gd = 0.3 + std::round(unit(rng) * 4.0) / 4.0;
      edit.push_back(gesture(gestures[letter(rng) % gestures.size()], e, e + gd));
      e += gd;
      continue;
    }
    edit.push_back(phoneme(alphabet[letter(rng)], e, e + d));
    e += d;
  }
  inst.edit = TokenSequence(std::move(edit));
  if (unit(rng) < 0.5) inst.ctx.left = phoneme(alphabet[letter(rng)], inst.edit.start_s() - 0.1, inst.edit.start_s());
  if (unit(rng) < 0.5) inst.ctx.right = phoneme(alphabet[letter(rng)], inst.edit.end_s(), inst.edit.end_s() + 0.1);
  return inst;
}

}  // namespace phonosynth::testing
