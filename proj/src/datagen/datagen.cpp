#include "phonosynth/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "phonosynth/errors.hpp"

namespace phonosynth {

namespace {

// Distinct streams derived from one seed.
std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

ExpressionVector gaussian_vector(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  ExpressionVector v;
  for (double& x : v) x = nd(rng);
  return v;
}

bool is_vowel(std::string_view name) {
  return !name.empty() && std::string_view("AEIOU").find(name[0]) != std::string_view::npos;
}

std::vector<int> all_phoneme_classes(const VisemeTable& table) {
  std::vector<int> out(static_cast<std::size_t>(table.phoneme_class_count()));
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = static_cast<int>(c);
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (!(duration_s > 0.0)) throw Error("duration_s must be positive");
  if (!(target_duration_s > 0.0)) throw Error("target_duration_s must be positive");
  if (!(fps > 0.0)) throw Error("fps must be positive");
  if (!(phoneme_rate > 0.0)) throw Error("phoneme_rate must be positive");
  if (!(smoothing > 0.0 && smoothing <= 1.0)) throw Error("smoothing must lie in (0, 1]");
  if (!(noise_sigma >= 0.0)) throw Error("noise_sigma must be >= 0");
  if (!(style_gain >= 0.0)) throw Error("style_gain must be >= 0");
  if (!(duration_jitter >= 0.0 && duration_jitter < 1.0)) throw Error("duration_jitter must lie in [0, 1)");
  if (!(gap_probability >= 0.0 && gap_probability <= 1.0)) throw Error("gap_probability must lie in [0, 1]");
  if (vocabulary_size < 1) throw Error("vocabulary_size must be >= 1");
  if (word_min_phonemes < 1 || word_max_phonemes < word_min_phonemes) throw Error("bad word length range");
  if (gestures_per_name < 0) throw Error("gestures_per_name must be >= 0");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw Error("coverage must lie in (0, 1]");
  if (!(affine_strength >= 0.0) || !(affine_offset >= 0.0)) throw Error("affine parameters must be >= 0");
}

ExpressionVector AffineMap::apply(const ExpressionVector& s) const {
  const Eigen::Map<const Eigen::VectorXd> sv(s.data(), static_cast<Eigen::Index>(kExpressionDim));
  const Eigen::VectorXd t = a * sv + b;
  ExpressionVector out;
  for (std::size_t c = 0; c < kExpressionDim; ++c) out[c] = t(static_cast<Eigen::Index>(c));
  return out;
}

ExpressionTrack AffineMap::apply(const ExpressionTrack& s) const {
  ExpressionTrack out;
  out.fps = s.fps;
  out.frames.reserve(s.size());
  for (const auto& f : s.frames) out.frames.push_back(ExpressionFrame::from(apply(f.to_vector())));
  return out;
}

SynthWorld make_world(const SynthSpec& spec, const VisemeTable& table) {
  spec.validate();
  SynthWorld w;
  std::mt19937_64 rng(mix(spec.seed, 1));
  w.rest = gaussian_vector(rng, 0.1);
  // Channel 0 carries the neutral mouth outline, channel 1 the aperture.
  w.rest[0] = 1.0;
  w.rest[1] = 0.3;

  std::vector<ExpressionVector> class_dev;
  for (int c = 0; c < table.phoneme_class_count(); ++c) {
    ExpressionVector d = gaussian_vector(rng, spec.prototype_scale);
    d[0] = 0.0;
    if (c == table.closure_class()) d[1] = -w.rest[1];
    class_dev.push_back(d);
  }
  w.closure_deviation = class_dev[static_cast<std::size_t>(table.closure_class())];
  for (const auto& [name, cls] : table.phonemes()) {
    ExpressionVector d = class_dev[static_cast<std::size_t>(cls)];
    const ExpressionVector jitter = gaussian_vector(rng, 0.25 * spec.prototype_scale);
    for (std::size_t c = 2; c < kExpressionDim; ++c) d[c] += jitter[c];
    w.phoneme_deviation.emplace(name, d);
  }
  for (auto& g : w.gesture_deviation) {
    g = gaussian_vector(rng, 1.5 * spec.prototype_scale);
    g[0] = 0.0;
  }

  const auto n = static_cast<Eigen::Index>(kExpressionDim);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) g(r, c) = nd(rng);
  }
  w.affine.a = Eigen::MatrixXd::Identity(n, n) + spec.affine_strength * g / std::sqrt(static_cast<double>(n));
  w.affine.b.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) w.affine.b(r) = spec.affine_offset * nd(rng);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.affine.a);
  const auto& sv = svd.singularValues();
  w.affine.condition_number = sv(0) / sv(n - 1);

  w.preview.rows.assign(2 * kPreviewPoints * kExpressionDim, 0.0f);
  std::normal_distribution<double> small(0.0, 0.02);
  for (std::size_t p = 0; p < kPreviewPoints; ++p) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(kPreviewPoints);
    float* x = &w.preview.rows[(2 * p) * kExpressionDim];
    float* y = &w.preview.rows[(2 * p + 1) * kExpressionDim];
    x[0] = static_cast<float>(0.5 * std::cos(theta));
    y[0] = 0.0f;
    y[1] = static_cast<float>(std::sin(theta));
    x[2] = static_cast<float>(0.2 * std::cos(theta));
    for (std::size_t c = 3; c < kExpressionDim; ++c) {
      x[c] = static_cast<float>(small(rng));
      y[c] = static_cast<float>(small(rng));
    }
  }
  return w;
}

std::vector<std::vector<std::string>> synth_vocabulary(const SynthSpec& spec, const VisemeTable& table,
                                                       const std::vector<int>& classes) {
  if (classes.empty()) throw Error("no viseme classes to sample from");
  std::uint64_t key = mix(spec.seed, 9);
  for (int c : classes) key = mix(key, static_cast<std::uint64_t>(c));
  std::mt19937_64 rng(key);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto pick = [&](std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uni(rng) * static_cast<double>(n))); };

  std::vector<std::vector<std::string>> by_class(static_cast<std::size_t>(table.phoneme_class_count()));
  for (const auto& [name, cls] : table.phonemes()) by_class[static_cast<std::size_t>(cls)].push_back(name);

  std::vector<std::vector<std::string>> vocab(static_cast<std::size_t>(spec.vocabulary_size));
  const int span = spec.word_max_phonemes - spec.word_min_phonemes + 1;
  for (auto& word : vocab) {
    const int len = spec.word_min_phonemes + static_cast<int>(pick(static_cast<std::size_t>(span)));
    for (int k = 0; k < len; ++k) {
      const auto& names = by_class[static_cast<std::size_t>(classes[pick(classes.size())])];
      if (names.empty()) throw Error("viseme class without phonemes");
      std::string name = names[pick(names.size())];
      if (is_vowel(name)) name += uni(rng) < 0.5 ? "0" : "1";
      word.push_back(std::move(name));
    }
  }
  return vocab;
}

std::vector<int> class_pair_cycle(const std::vector<int>& classes) {
  // Hierholzer on the complete digraph with self-loops.
  const std::size_t k = classes.size();
  if (k == 0) return {};
  std::vector<std::size_t> next(k, 0);
  std::vector<std::size_t> stack{0}, circuit;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    if (next[v] < k) {
      stack.push_back(next[v]++);
    } else {
      circuit.push_back(v);
      stack.pop_back();
    }
  }
  std::vector<int> out;
  out.reserve(circuit.size());
  for (auto it = circuit.rbegin(); it != circuit.rend(); ++it) out.push_back(classes[*it]);
  return out;
}

SynthScript sample_script(const SynthSpec& spec, const VisemeTable& table, std::uint64_t token_seed,
                          double duration_s, const std::vector<int>& classes, int gestures_per_name,
                          bool balanced_opening) {
  const auto vocab = synth_vocabulary(spec, table, classes);
  std::mt19937_64 rng(mix(token_seed, 2));
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const auto n = static_cast<std::size_t>(std::lround(duration_s * spec.phoneme_rate));
  const std::size_t gesture_total = static_cast<std::size_t>(gestures_per_name) * kGestureNames.size();
  std::vector<std::size_t> gesture_at;  // insert before the word starting at or after this phoneme
  for (std::size_t g = 0; g < gesture_total; ++g) gesture_at.push_back((g + 1) * n / (gesture_total + 1));

  std::vector<Token> phones;
  std::vector<Token> gestures;
  double t = 0.1;
  std::size_t next_gesture = 0;
  const double base = 1.0 / spec.phoneme_rate;
  if (balanced_opening) {
    std::vector<std::vector<std::string>> by_class(static_cast<std::size_t>(table.phoneme_class_count()));
    for (const auto& [name, cls] : table.phonemes()) by_class[static_cast<std::size_t>(cls)].push_back(name);
    for (int cls : class_pair_cycle(classes)) {
      if (phones.size() == n) break;
      const auto& names = by_class[static_cast<std::size_t>(cls)];
      std::string name = names[std::min(names.size() - 1, static_cast<std::size_t>(uni(rng) * static_cast<double>(names.size())))];
      if (is_vowel(name)) name += uni(rng) < 0.5 ? "0" : "1";
      const double dur = base * (1.0 + spec.duration_jitter * (2.0 * uni(rng) - 1.0));
      phones.push_back(phoneme(std::move(name), t, t + dur));
      t += dur;
    }
  }
  while (phones.size() < n) {
    while (next_gesture < gesture_at.size() && gesture_at[next_gesture] <= phones.size()) {
      const double dur = 0.3 + 1.7 * uni(rng);
      t += 0.1;
      gestures.push_back(gesture(std::string(kGestureNames[next_gesture % kGestureNames.size()]), t, t + dur));
      t += dur + 0.1;
      ++next_gesture;
    }
    if (uni(rng) < spec.gap_probability) t += 0.05 + 0.15 * uni(rng);
    const auto& word = vocab[std::min(vocab.size() - 1, static_cast<std::size_t>(uni(rng) * static_cast<double>(vocab.size())))];
    for (const std::string& name : word) {
      if (phones.size() == n) break;
      const double dur = base * (1.0 + spec.duration_jitter * (2.0 * uni(rng) - 1.0));
      phones.push_back(phoneme(name, t, t + dur));
      t += dur;
    }
  }
  t += 0.1;

  // Stretch so the script ends exactly at duration_s.
  const double k = duration_s / t;
  for (Token& tok : phones) {
    tok.start_s *= k;
    tok.end_s = std::min(tok.end_s * k, duration_s);
  }
  for (Token& tok : gestures) {
    tok.start_s *= k;
    tok.end_s = std::min(tok.end_s * k, duration_s);
  }
  return {TokenSequence(std::move(phones)), std::move(gestures)};
}

ExpressionTrack render_track(const SynthWorld& world, const SynthSpec& spec, const SynthScript& script,
                             double duration_s, double gain, double noise_sigma, std::uint64_t noise_seed) {
  std::vector<const Token*> items;
  for (const Token& t : script.phonemes) items.push_back(&t);
  for (const Token& t : script.gestures) items.push_back(&t);
  std::sort(items.begin(), items.end(), [](const Token* a, const Token* b) { return a->start_s < b->start_s; });

  ExpressionTrack track;
  track.fps = spec.fps;
  const auto frames = static_cast<std::size_t>(std::lround(duration_s * spec.fps));
  track.frames.resize(frames);
  std::mt19937_64 rng(mix(noise_seed, 3));
  std::normal_distribution<double> nd(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  ExpressionVector x{};
  static const ExpressionVector kZero{};
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const double tau = static_cast<double>(f) / spec.fps;
    while (cursor < items.size() && items[cursor]->end_s <= tau) ++cursor;
    const ExpressionVector* target = &kZero;
    if (cursor < items.size() && items[cursor]->start_s <= tau) {
      const Token& tok = *items[cursor];
      if (tok.is_gesture()) {
        const std::string canon = canonical_gesture_name(tok.name);
        const auto it = std::find(kGestureNames.begin(), kGestureNames.end(), canon);
        target = &world.gesture_deviation[static_cast<std::size_t>(it - kGestureNames.begin())];
      } else {
        const auto it = world.phoneme_deviation.find(strip_stress(tok.name));
        if (it == world.phoneme_deviation.end()) throw UnknownTokenError(tok.name);
        target = &it->second;
      }
    }
    ExpressionVector out;
    for (std::size_t c = 0; c < kExpressionDim; ++c) {
      x[c] += spec.smoothing * ((*target)[c] - x[c]);
      const double noise = noise_sigma > 0.0 ? nd(rng) : 0.0;
      out[c] = world.rest[c] + gain * (x[c] + noise);
    }
    track.frames[f] = ExpressionFrame::from(out);
  }
  return track;
}

RepositoryBundle gen_repository(const SynthSpec& spec, const VisemeTable& table) {
  const SynthWorld world = make_world(spec, table);
  const SynthScript script = sample_script(spec, table, spec.token_seed, spec.duration_s, all_phoneme_classes(table),
                                           spec.gestures_per_name, spec.balanced_opening);
  RepositoryBundle b;
  b.style = spec.style;
  b.tokens = script.phonemes;
  b.gestures = script.gestures;
  b.track = render_track(world, spec, script, spec.duration_s, spec.style_gain, spec.noise_sigma,
                         mix(spec.token_seed, 4));

  // Closed-mouth exemplars: frames inside evenly spread M/B/P tokens set to
  // the closure pose plus a small per-exemplar offset.
  std::vector<std::size_t> closures;
  for (std::size_t i = 0; i < b.tokens.size(); ++i) {
    if (table.is_closure(b.tokens[i].name)) closures.push_back(i);
  }
  const std::size_t count = std::min(spec.closure_exemplars, closures.size());
  std::mt19937_64 rng(mix(spec.token_seed, 5));
  for (std::size_t e = 0; e < count; ++e) {
    const Token& tok = b.tokens[closures[e * closures.size() / count]];
    const auto frame = static_cast<std::size_t>(std::ceil(0.5 * (tok.start_s + tok.end_s) * spec.fps));
    if (frame >= b.track.size()) continue;
    if (!b.closed_mouth_exemplars.empty() && b.closed_mouth_exemplars.back() == frame) continue;
    const ExpressionVector offset = gaussian_vector(rng, 0.02);
    ExpressionVector v;
    for (std::size_t c = 0; c < kExpressionDim; ++c) {
      v[c] = world.rest[c] + spec.style_gain * (world.closure_deviation[c] + (c < 2 ? 0.0 : offset[c]));
    }
    b.track.frames[frame] = ExpressionFrame::from(v);
    b.closed_mouth_exemplars.push_back(frame);
  }
  b.preview_basis = world.preview;
  b.validate();
  return b;
}

std::vector<int> target_classes(const SynthSpec& spec, const VisemeTable& table, double coverage) {
  std::vector<int> classes = all_phoneme_classes(table);
  if (coverage >= 1.0) return classes;
  std::mt19937_64 rng(mix(spec.target_seed, 6));
  std::shuffle(classes.begin(), classes.end(), rng);
  const auto keep = static_cast<std::size_t>(
      std::max<long>(1, std::lround(coverage * static_cast<double>(classes.size()))));
  classes.resize(std::min(keep, classes.size()));
  std::sort(classes.begin(), classes.end());
  return classes;
}

TargetClip gen_target(const SynthSpec& spec, const VisemeTable& table) { return gen_target(spec, table, spec.coverage); }

TargetClip gen_target(const SynthSpec& spec, const VisemeTable& table, double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0)) throw Error("coverage must lie in (0, 1]");
  const SynthWorld world = make_world(spec, table);
  const SynthScript script =
      sample_script(spec, table, spec.target_seed, spec.target_duration_s, target_classes(spec, table, coverage), 0);
  const ExpressionTrack neutral = render_track(world, spec, script, spec.target_duration_s, 1.0, 0.0, 0);

  TargetClip clip;
  clip.tokens = script.phonemes;
  clip.track.fps = spec.fps;
  clip.track.frames.reserve(neutral.size());
  std::mt19937_64 rng(mix(spec.target_seed, 7));
  std::normal_distribution<double> nd(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  for (const auto& f : neutral.frames) {
    ExpressionVector v = world.affine.apply(f.to_vector());
    if (spec.noise_sigma > 0.0) {
      for (double& x : v) x += nd(rng);
    }
    clip.track.frames.push_back(ExpressionFrame::from(v));
  }

  std::mt19937_64 shape_rng(mix(spec.seed, 8));
  std::normal_distribution<double> unit(0.0, 1.0);
  for (float& g : clip.geometry) g = static_cast<float>(unit(shape_rng));
  for (float& r : clip.reflectance) r = static_cast<float>(unit(shape_rng));
  const std::size_t n = clip.track.size();
  clip.pose.resize(n);
  clip.illumination.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    const double t = static_cast<double>(f) / spec.fps;
    for (std::size_t k = 0; k < kPoseDim; ++k) {
      clip.pose[f][k] = static_cast<float>(0.1 * std::sin(2.0 * std::numbers::pi * 0.2 * t + static_cast<double>(k)));
    }
    for (std::size_t k = 0; k < kIlluminationDim; ++k) {
      clip.illumination[f][k] =
          static_cast<float>(0.5 + 0.05 * std::cos(2.0 * std::numbers::pi * 0.05 * t + 0.3 * static_cast<double>(k)));
    }
  }
  clip.validate();
  return clip;
}

HeldOutProbe held_out_probe(const SynthSpec& spec, const VisemeTable& table, double duration_s,
                            std::uint64_t token_seed) {
  const SynthWorld world = make_world(spec, table);
  const SynthScript script = sample_script(spec, table, token_seed, duration_s, all_phoneme_classes(table), 0);
  HeldOutProbe probe;
  probe.source = render_track(world, spec, script, duration_s, 1.0, 0.0, 0);
  probe.truth = world.affine.apply(probe.source);
  return probe;
}

double mean_deviation_from_rest(const ExpressionTrack& track, const ExpressionVector& rest) {
  if (track.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& f : track.frames) sum += std::sqrt(squared_distance(f, rest));
  return sum / static_cast<double>(track.size());
}

}  // namespace phonosynth
