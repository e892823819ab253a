#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phonosynth/bundle.hpp"
#include "phonosynth/expression.hpp"
#include "phonosynth/token.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

// Parameters of the synthetic world. `seed` fixes everything shared between
// repositories and targets (prototypes, affine map, preview basis); the token
// seeds only change what is said.
struct SynthSpec {
  std::uint64_t seed = 7;
  std::uint64_t token_seed = 1;
  std::string style = "neutral";
  double style_gain = 1.0;  // scales deviation from rest: >1 energetic, <1 mumble
  double fps = 30.0;
  double phoneme_rate = 12.0;  // tokens per second
  double duration_s = 120.0;
  double smoothing = 0.25;     // single-pole coefficient per frame
  double noise_sigma = 0.01;
  double prototype_scale = 0.3;
  double duration_jitter = 0.3;  // relative, uniform
  double gap_probability = 0.1;  // silence between words
  // Speech is drawn from a vocabulary of synthetic words so that phoneme runs
  // recur, as in natural speech.
  int vocabulary_size = 150;
  int word_min_phonemes = 2;
  int word_max_phonemes = 6;
  int gestures_per_name = 3;
  std::size_t closure_exemplars = 8;
  // Repositories open with a phonetically balanced passage in which every
  // ordered pair of viseme classes occurs at least once.
  bool balanced_opening = true;

  double affine_strength = 0.3;  // A = I + strength * G / sqrt(64)
  double affine_offset = 0.05;   // b ~ N(0, offset^2)
  std::uint64_t target_seed = 2;
  double target_duration_s = 150.0;
  double coverage = 1.0;  // fraction of viseme classes the target speaks

  void validate() const;
  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

// Source-to-target map t = A s + b.
struct AffineMap {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  double condition_number = 0.0;

  ExpressionVector apply(const ExpressionVector& s) const;
  ExpressionTrack apply(const ExpressionTrack& s) const;
};

struct SynthWorld {
  ExpressionVector rest{};
  std::map<std::string, ExpressionVector, std::less<>> phoneme_deviation;  // keyed without stress
  std::array<ExpressionVector, 8> gesture_deviation{};
  ExpressionVector closure_deviation{};
  AffineMap affine;
  PreviewBasis preview;
};

SynthWorld make_world(const SynthSpec& spec, const VisemeTable& table);

// Words from the vocabulary over `classes` (and gesture annotations, which
// sit in silence between words) with exactly lround(duration * rate)
// phonemes, ending at `duration_s`. With `balanced_opening` the script
// starts with a run covering every ordered class pair of `classes`.
struct SynthScript {
  TokenSequence phonemes;
  std::vector<Token> gestures;
};
SynthScript sample_script(const SynthSpec& spec, const VisemeTable& table, std::uint64_t token_seed,
                          double duration_s, const std::vector<int>& classes, int gestures_per_name,
                          bool balanced_opening = false);

// Class sequence of length k^2 + 1 in which every ordered pair (including
// repeats) of the k classes appears exactly once as a neighbour pair.
std::vector<int> class_pair_cycle(const std::vector<int>& classes);

// frame = rest + gain * (smoothed prototype staircase + noise); gaps pull
// towards rest.
ExpressionTrack render_track(const SynthWorld& world, const SynthSpec& spec, const SynthScript& script,
                             double duration_s, double gain, double noise_sigma, std::uint64_t noise_seed);

RepositoryBundle gen_repository(const SynthSpec& spec, const VisemeTable& table);

// Target speaking only a `coverage` fraction of the viseme classes; its
// track is the affine image of the neutral rendering plus noise.
TargetClip gen_target(const SynthSpec& spec, const VisemeTable& table, double coverage);
TargetClip gen_target(const SynthSpec& spec, const VisemeTable& table);

// Vocabulary over the given classes; depends only on the world seed and the
// class set.
std::vector<std::vector<std::string>> synth_vocabulary(const SynthSpec& spec, const VisemeTable& table,
                                                       const std::vector<int>& classes);

// Viseme classes spoken by the target for `coverage`.
std::vector<int> target_classes(const SynthSpec& spec, const VisemeTable& table, double coverage);

// Fresh noiseless neutral rendering and its exact target-space image, for
// measuring retargeting error on data never seen in training.
struct HeldOutProbe {
  ExpressionTrack source;
  ExpressionTrack truth;
};
HeldOutProbe held_out_probe(const SynthSpec& spec, const VisemeTable& table, double duration_s,
                            std::uint64_t token_seed);

// Per-frame mean deviation from the rest pose (Euclidean), averaged over
// frames.
double mean_deviation_from_rest(const ExpressionTrack& track, const ExpressionVector& rest);

}  // namespace phonosynth
