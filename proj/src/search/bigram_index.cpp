#include "phonosynth/errors.hpp"
#include "phonosynth/search.hpp"

namespace phonosynth {

BigramIndex BigramIndex::build(const RepositoryBundle& repo, const VisemeTable& table) {
  const TokenSequence& v = repo.tokens;
  if (v.size() < 2) throw Error("repository needs at least two phonemes to index");

  BigramIndex index;
  index.classes_ = table.class_count();
  const auto k = static_cast<std::size_t>(index.classes_);
  index.bigrams_.resize(k * k);
  index.unigrams_.resize(k);
  index.gesture_buckets_.resize(k);

  index.coded_.reserve(v.size());
  for (const Token& t : v) {
    CodedToken c;
    c.viseme = table.viseme_of(t);
    c.gesture = false;
    c.name = index.names_.try_emplace(t.name, static_cast<int>(index.names_.size())).first->second;
    c.duration = t.duration();
    index.coded_.push_back(c);
  }
  for (std::size_t p = 0; p < index.coded_.size(); ++p) {
    const auto a = static_cast<std::size_t>(index.coded_[p].viseme);
    index.unigrams_[a].push_back(static_cast<std::uint32_t>(p));
    if (p + 1 < index.coded_.size()) {
      const auto b = static_cast<std::size_t>(index.coded_[p + 1].viseme);
      index.bigrams_[a * k + b].push_back(static_cast<std::uint32_t>(p));
      ++index.bigram_entries_;
    }
  }
  for (std::size_t g = 0; g < repo.gestures.size(); ++g) {
    const Token& t = repo.gestures[g];
    CodedToken c;
    c.viseme = table.viseme_of(t);
    c.name = c.viseme;
    c.gesture = true;
    c.duration = t.duration();
    index.coded_gestures_.push_back(c);
    index.gesture_buckets_[static_cast<std::size_t>(c.viseme)].push_back(static_cast<std::uint32_t>(g));
    ++index.gesture_entries_;
  }
  return index;
}

BigramIndex build_index(const RepositoryBundle& repo, const VisemeTable& table) {
  return BigramIndex::build(repo, table);
}

std::span<const std::uint32_t> BigramIndex::lookup(int first, int second) const {
  if (first < 0 || second < 0 || first >= classes_ || second >= classes_) return {};
  return bigrams_[static_cast<std::size_t>(first) * static_cast<std::size_t>(classes_) +
                  static_cast<std::size_t>(second)];
}

std::span<const std::uint32_t> BigramIndex::lookup_unigram(int cls) const {
  if (cls < 0 || cls >= classes_) return {};
  return unigrams_[static_cast<std::size_t>(cls)];
}

std::span<const std::uint32_t> BigramIndex::lookup_gesture(int cls) const {
  if (cls < 0 || cls >= classes_) return {};
  return gesture_buckets_[static_cast<std::size_t>(cls)];
}

CodedToken BigramIndex::code(const Token& t, const VisemeTable& table) const {
  CodedToken c;
  c.viseme = table.viseme_of(t);
  c.gesture = t.is_gesture();
  c.duration = t.duration();
  if (c.gesture) {
    c.name = c.viseme;
  } else {
    const auto it = names_.find(t.name);
    c.name = it == names_.end() ? -1 : it->second;
  }
  return c;
}

}  // namespace phonosynth
