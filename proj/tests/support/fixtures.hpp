#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "phonosynth/bundle.hpp"
#include "phonosynth/lexicon.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth::testing {

inline std::filesystem::path config_dir() { return PHONOSYNTH_TEST_CONFIG_DIR; }

inline const VisemeTable& table() {
  static const VisemeTable t = VisemeTable::load(config_dir() / "visemes.tsv");
  return t;
}

inline const Lexicon& lexicon() {
  static const Lexicon l = Lexicon::load(config_dir() / "lexicon.dict");
  return l;
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("phonosynth-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline TokenSequence contiguous(const std::vector<std::string>& names, double dur = 0.1, double start = 0.0) {
  std::vector<Token> toks;
  for (std::size_t i = 0; i < names.size(); ++i) {
    toks.push_back(phoneme(names[i], start + static_cast<double>(i) * dur, start + static_cast<double>(i + 1) * dur));
  }
  return TokenSequence(std::move(toks));
}

using FrameFn = std::function<double(std::size_t frame, std::size_t channel)>;

inline ExpressionTrack make_track(std::size_t frames, double fps, const FrameFn& fn) {
  ExpressionTrack t;
  t.fps = fps;
  t.frames.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < kExpressionDim; ++c) t.frames[f][c] = static_cast<float>(fn(f, c));
  }
  return t;
}

// Repository over `names` with contiguous 0.1 s tokens and a smooth,
// position-dependent track; exemplars at the first frame of closure phonemes.
inline RepositoryBundle make_repo(const std::vector<std::string>& names, double dur = 0.1, double fps = 30.0) {
  RepositoryBundle b;
  b.tokens = contiguous(names, dur);
  const auto frames = static_cast<std::size_t>(std::ceil(b.tokens.end_s() * fps)) + 1;
  b.track = make_track(frames, fps, [](std::size_t f, std::size_t c) {
    return std::sin(0.37 * static_cast<double>(f) + 0.11 * static_cast<double>(c));
  });
  for (const Token& t : b.tokens) {
    if (table().is_closure(t.name)) {
      const auto f = static_cast<std::size_t>(std::ceil(t.start_s * fps));
      if (f < frames && (b.closed_mouth_exemplars.empty() || b.closed_mouth_exemplars.back() != f)) {
        b.closed_mouth_exemplars.push_back(f);
      }
    }
  }
  return b;
}

// Phoneme names by class, for random instances.
inline std::vector<std::string> some_phonemes() {
  return {"M", "B", "P", "F", "V", "TH", "T", "D", "N", "L", "S", "Z", "SH", "K", "G", "R",
          "IY", "IH", "AA1", "AH0", "EH1", "OW1", "UW1", "W"};
}

}  // namespace phonosynth::testing
