#include <doctest.h>

#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phonosynth/edit_script.hpp"
#include "phonosynth/errors.hpp"
#include "phonosynth/expression.hpp"
#include "phonosynth/token.hpp"
#include "phonosynth/viseme_table.hpp"
#include "support/fixtures.hpp"

using namespace phonosynth;
using phonosynth::testing::table;
using phonosynth::testing::lexicon;

TEST_CASE("closure phonemes share one class") {
  const VisemeTable& t = table();
  CHECK(t.viseme_of("M") == t.closure_class());
  CHECK(t.viseme_of("B") == t.closure_class());
  CHECK(t.viseme_of("P") == t.closure_class());
  CHECK(t.is_closure("M"));
  CHECK_FALSE(t.is_closure("F"));
}

TEST_CASE("gestures get singleton classes after the phoneme classes") {
  const VisemeTable& t = table();
  std::set<int> seen;
  for (auto g : kGestureNames) {
    const int c = t.viseme_of(g);
    CHECK(c >= t.phoneme_class_count());
    CHECK(seen.insert(c).second);
  }
  CHECK(t.viseme_of(canonical_gesture_name("smile")) == t.viseme_of("teeth_smile"));
  for (const auto& [name, cls] : t.phonemes()) CHECK(cls < t.phoneme_class_count());
}

TEST_CASE("stress digits share a class; AH0 vs AA1 follows the table file") {
  const VisemeTable& t = table();
  CHECK(t.viseme_of("AH0") == t.viseme_of("AH1"));
  CHECK(t.viseme_of("AH0") == t.viseme_of("AH"));

  // Read the two classes straight from the shipped file.
  std::ifstream in(phonosynth::testing::config_dir() / "visemes.tsv");
  std::map<std::string, int> file;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    file[line.substr(0, tab)] = std::stoi(line.substr(tab + 1));
  }
  CHECK((t.viseme_of("AH0") == t.viseme_of("AA1")) == (file.at("AH") == file.at("AA")));
}

TEST_CASE("viseme_of is total over ARPAbet and gestures and rejects the rest") {
  const VisemeTable& t = table();
  for (auto p : kArpabet) CHECK_NOTHROW(t.viseme_of(p));
  for (auto g : kGestureNames) CHECK_NOTHROW(t.viseme_of(g));
  CHECK_THROWS_AS(t.viseme_of("QQ"), UnknownTokenError);
  CHECK_THROWS_AS(t.viseme_of(""), UnknownTokenError);
}

TEST_CASE("viseme table file errors") {
  std::istringstream bad("M\tx\n");
  CHECK_THROWS_AS(VisemeTable::parse(bad), SchemaError);
  std::istringstream dup("M\t0\nM\t1\n");
  CHECK_THROWS_AS(VisemeTable::parse(dup), SchemaError);
}

TEST_CASE("token sequences reject overlap, negative start and empty intervals") {
  CHECK_THROWS_AS(TokenSequence({phoneme("M", 0.0, 0.2), phoneme("AA1", 0.1, 0.3)}), Error);
  CHECK_THROWS_AS(TokenSequence({phoneme("M", -0.1, 0.2)}), Error);
  CHECK_THROWS_AS(TokenSequence({phoneme("M", 0.2, 0.2)}), Error);
  const TokenSequence gap({phoneme("M", 0.0, 0.1), phoneme("AA1", 0.3, 0.4)});
  CHECK(gap.size() == 2);
  const TokenSequence moved = gap.shifted(1.0);
  CHECK(moved[0].start_s == doctest::Approx(1.0));
  CHECK(moved[1].end_s == doctest::Approx(1.4));
}

TEST_CASE("edit script: hi [smile] with aligned timings") {
  const TokenSequence align({phoneme("HH", 0.0, 0.1), phoneme("AY1", 0.1, 0.3)});
  EditTiming timing;
  timing.alignment = align;
  const EditScript s = parse_edit_script("hi [smile]", lexicon(), table(), timing);
  REQUIRE(s.tokens.size() == 3);
  CHECK(s.tokens[0].name == "HH");
  CHECK(s.tokens[0].duration() == doctest::Approx(0.1));
  CHECK(s.tokens[1].name == "AY1");
  CHECK(s.tokens[1].duration() == doctest::Approx(0.2));
  CHECK(s.tokens[2].is_gesture());
  CHECK(s.tokens[2].name == "teeth_smile");
  CHECK(s.tokens[2].duration() == doctest::Approx(0.5));
  CHECK(s.tokens[2].start_s == doctest::Approx(0.3));
}

TEST_CASE("edit script: explicit gesture duration and empty input") {
  const EditScript s = parse_edit_script("[smile:1.5s]", lexicon(), table());
  REQUIRE(s.tokens.size() == 1);
  CHECK(s.tokens[0].is_gesture());
  CHECK(s.tokens[0].duration() == doctest::Approx(1.5));
  CHECK_THROWS_AS(parse_edit_script("", lexicon(), table()), InvalidEditError);
  CHECK_THROWS_AS(parse_edit_script("   ", lexicon(), table()), InvalidEditError);
}

TEST_CASE("edit script: malformed directives and unknown words") {
  CHECK_THROWS_AS(parse_edit_script("hi [smile", lexicon(), table()), InvalidEditError);
  CHECK_THROWS_AS(parse_edit_script("hi smile]", lexicon(), table()), InvalidEditError);
  CHECK_THROWS_AS(parse_edit_script("hi []", lexicon(), table()), InvalidEditError);
  CHECK_THROWS_AS(parse_edit_script("hi [wink]", lexicon(), table()), InvalidEditError);
  CHECK_THROWS_AS(parse_edit_script("hi [smile:abc]", lexicon(), table()), InvalidEditError);
  CHECK_THROWS_AS(parse_edit_script("zzqq", lexicon(), table()), OutOfVocabularyError);
}

TEST_CASE("edit script: gestures push later tokens back") {
  const EditScript s = parse_edit_script("hi [smile:1s] fox", lexicon(), table());
  REQUIRE(s.tokens.size() == 7);
  CHECK(s.tokens[2].is_gesture());
  CHECK(s.tokens[3].start_s == doctest::Approx(s.tokens[2].end_s));
  CHECK(s.tokens[3].name == "F");
}

TEST_CASE("edit script JSON round-trip is exact") {
  const EditScript s = parse_edit_script("the quick [smile:0.7s] brown fox", lexicon(), table());
  const nlohmann::json j = to_json(s);
  const EditScript back = edit_script_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back == s);
}

TEST_CASE("expression frame helpers") {
  ExpressionVector v{};
  v[3] = 0.25;
  const ExpressionFrame f = ExpressionFrame::from(v);
  CHECK(f[3] == 0.25f);
  CHECK(f.all_finite());
  ExpressionTrack t;
  t.frames = {f, f};
  CHECK_NOTHROW(t.validate());
  t.frames[1][0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(t.validate(), ShapeError);
  t.fps = 0.0;
  CHECK_THROWS_AS(t.validate(), ShapeError);
}

TEST_CASE("track sampling interpolates and clamps") {
  ExpressionTrack t = phonosynth::testing::make_track(3, 10.0, [](std::size_t f, std::size_t) { return 2.0 * static_cast<double>(f); });
  CHECK(t.sample(0.05)[0] == doctest::Approx(1.0));
  CHECK(t.sample(-1.0)[0] == doctest::Approx(0.0));
  CHECK(t.sample(9.0)[0] == doctest::Approx(4.0));
}
