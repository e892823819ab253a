#include "phonosynth/edit_script.hpp"

#include <cctype>
#include <charconv>
#include <variant>

#include <nlohmann/json.hpp>

#include "phonosynth/errors.hpp"

namespace phonosynth {

namespace {

struct WordItem {
  std::string word;
};

struct GestureItem {
  std::string name;
  double duration_s;
};

using Item = std::variant<WordItem, GestureItem>;

GestureItem parse_directive(std::string_view body) {
  std::string_view name = body;
  double duration = kDefaultGestureDuration;
  if (const auto colon = body.find(':'); colon != std::string_view::npos) {
    name = body.substr(0, colon);
    std::string_view dur = body.substr(colon + 1);
    if (!dur.empty() && (dur.back() == 's' || dur.back() == 'S')) dur.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(dur.data(), dur.data() + dur.size(), duration);
    if (dur.empty() || ec != std::errc() || ptr != dur.data() + dur.size() || !(duration > 0.0)) {
      throw InvalidEditError("bad gesture duration in directive [" + std::string(body) + "]");
    }
  }
  std::string canonical = canonical_gesture_name(name);
  if (canonical.empty()) {
    throw InvalidEditError("unknown gesture directive [" + std::string(body) + "]");
  }
  return GestureItem{std::move(canonical), duration};
}

std::vector<Item> tokenize(std::string_view text) {
  std::vector<Item> items;
  std::string word;
  auto flush = [&] {
    std::string norm = normalize_word(word);
    if (!norm.empty()) items.emplace_back(WordItem{std::move(norm)});
    word.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '[') {
      flush();
      const auto close = text.find(']', i + 1);
      if (close == std::string_view::npos) throw InvalidEditError("unterminated directive");
      const std::string_view body = text.substr(i + 1, close - i - 1);
      if (body.empty()) throw InvalidEditError("empty directive []");
      items.emplace_back(parse_directive(body));
      i = close;
    } else if (c == ']') {
      throw InvalidEditError("unmatched ']'");
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      word.push_back(c);
    }
  }
  flush();
  return items;
}

}  // namespace

EditScript parse_edit_script(std::string_view text, const Lexicon& lexicon, const VisemeTable& table,
                             const EditTiming& timing) {
  const std::vector<Item> items = tokenize(text);
  if (items.empty()) throw InvalidEditError("empty edit");

  std::vector<std::string> phones;
  for (const Item& item : items) {
    if (const auto* w = std::get_if<WordItem>(&item)) {
      for (const std::string& p : lexicon.pronounce(w->word)) {
        table.viseme_of(p);
        phones.push_back(p);
      }
    }
  }

  std::vector<Token> tokens;
  if (timing.alignment) {
    std::vector<Token> aligned;
    for (const Token& t : *timing.alignment) {
      if (!t.is_gesture()) aligned.push_back(t);
    }
    if (aligned.size() != phones.size()) {
      throw InvalidEditError("alignment has " + std::to_string(aligned.size()) + " phonemes, edit needs " +
                             std::to_string(phones.size()));
    }
    double offset = 0.0;
    double cursor = aligned.empty() ? 0.0 : aligned.front().start_s;
    std::size_t next = 0;
    for (const Item& item : items) {
      if (const auto* g = std::get_if<GestureItem>(&item)) {
        tokens.push_back(gesture(g->name, cursor, cursor + g->duration_s));
        cursor += g->duration_s;
        offset += g->duration_s;
        continue;
      }
      const auto& pron = lexicon.pronounce(std::get<WordItem>(item).word);
      for (std::size_t k = 0; k < pron.size(); ++k, ++next) {
        const Token& a = aligned[next];
        if (strip_stress(a.name) != strip_stress(pron[k])) {
          throw InvalidEditError("alignment phoneme '" + a.name + "' does not match expected '" + pron[k] + "'");
        }
        tokens.push_back(phoneme(a.name, a.start_s + offset, a.end_s + offset));
        cursor = a.end_s + offset;
      }
    }
  } else {
    if (!(timing.phoneme_rate > 0.0)) throw InvalidEditError("phoneme rate must be positive");
    const double dur = 1.0 / timing.phoneme_rate;
    double cursor = 0.0;
    std::size_t next = 0;
    for (const Item& item : items) {
      if (const auto* g = std::get_if<GestureItem>(&item)) {
        tokens.push_back(gesture(g->name, cursor, cursor + g->duration_s));
        cursor += g->duration_s;
        continue;
      }
      for (std::size_t k = 0; k < lexicon.pronounce(std::get<WordItem>(item).word).size(); ++k, ++next) {
        tokens.push_back(phoneme(phones[next], cursor, cursor + dur));
        cursor += dur;
      }
    }
  }
  return EditScript{std::string(text), TokenSequence(std::move(tokens))};
}

nlohmann::json to_json(const EditScript& script) {
  nlohmann::json toks = nlohmann::json::array();
  for (const Token& t : script.tokens) {
    toks.push_back({to_string(t.kind), t.name, t.start_s, t.end_s});
  }
  return {{"text", script.text}, {"tokens", std::move(toks)}};
}

EditScript edit_script_from_json(const nlohmann::json& j) {
  EditScript s;
  s.text = j.at("text").get<std::string>();
  std::vector<Token> tokens;
  for (const auto& t : j.at("tokens")) {
    const auto kind = t.at(0).get<std::string>();
    if (kind != "phoneme" && kind != "gesture") throw InvalidEditError("bad token kind '" + kind + "'");
    tokens.push_back(Token{kind == "phoneme" ? TokenKind::phoneme : TokenKind::gesture, t.at(1).get<std::string>(),
                           t.at(2).get<double>(), t.at(3).get<double>()});
  }
  s.tokens = TokenSequence(std::move(tokens));
  return s;
}

}  // namespace phonosynth
