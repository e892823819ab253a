#include "phonosynth/viseme_table.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "phonosynth/errors.hpp"

namespace phonosynth {

namespace {

struct GestureAlias {
  std::string_view alias;
  std::string_view canonical;
};

constexpr GestureAlias kGestureAliases[] = {
    {"smile", "teeth_smile"},
    {"closed-smile", "closed_smile"},
    {"teeth-smile", "teeth_smile"},
    {"big-smile", "big_smile"},
    {"mouth-left", "mouth_left"},
    {"mouth-right", "mouth_right"},
};

int gesture_index(std::string_view name) {
  for (std::size_t i = 0; i < kGestureNames.size(); ++i) {
    if (kGestureNames[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::string canonical_gesture_name(std::string_view name) {
  if (gesture_index(name) >= 0) return std::string(name);
  for (const auto& a : kGestureAliases) {
    if (a.alias == name) return std::string(a.canonical);
  }
  return {};
}

std::string_view strip_stress(std::string_view name) {
  if (name.size() > 1 && std::isdigit(static_cast<unsigned char>(name.back()))) {
    return name.substr(0, name.size() - 1);
  }
  return name;
}

VisemeTable VisemeTable::parse(std::istream& in) {
  VisemeTable table;
  std::string line;
  int line_no = 0;
  int max_class = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw SchemaError("line " + std::to_string(line_no), "expected phoneme<TAB>class_id");
    }
    std::string name = line.substr(0, tab);
    int cls = 0;
    try {
      std::size_t used = 0;
      cls = std::stoi(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw SchemaError("line " + std::to_string(line_no), "bad class id");
    }
    if (cls < 0) throw SchemaError("line " + std::to_string(line_no), "negative class id");
    if (!table.phoneme_class_.emplace(name, cls).second) {
      throw SchemaError("line " + std::to_string(line_no), "duplicate phoneme " + name);
    }
    max_class = std::max(max_class, cls);
  }

  for (std::string_view p : kArpabet) {
    if (!table.phoneme_class_.contains(p)) {
      throw SchemaError("visemes", "missing phoneme " + std::string(p));
    }
  }
  std::set<int> used;
  for (const auto& [name, cls] : table.phoneme_class_) used.insert(cls);
  if (static_cast<int>(used.size()) != max_class + 1) {
    throw SchemaError("visemes", "class ids must be dense from 0");
  }
  const int m = table.phoneme_class_.at("M");
  if (table.phoneme_class_.at("B") != m || table.phoneme_class_.at("P") != m) {
    throw SchemaError("visemes", "M, B and P must share one class");
  }
  table.phoneme_classes_ = max_class + 1;
  table.closure_class_ = m;
  return table;
}

VisemeTable VisemeTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open viseme table " + path.string());
  return parse(in);
}

bool VisemeTable::is_gesture_name(std::string_view name) const { return gesture_index(name) >= 0; }

bool VisemeTable::contains(std::string_view name) const {
  return is_gesture_name(name) || phoneme_class_.contains(strip_stress(name));
}

int VisemeTable::viseme_of(std::string_view name) const {
  if (const int g = gesture_index(name); g >= 0) return phoneme_classes_ + g;
  const auto it = phoneme_class_.find(strip_stress(name));
  if (it == phoneme_class_.end()) throw UnknownTokenError(std::string(name));
  return it->second;
}

int VisemeTable::viseme_of(const Token& token) const {
  if (token.is_gesture()) {
    const int g = gesture_index(token.name);
    if (g < 0) throw UnknownTokenError(token.name);
    return phoneme_classes_ + g;
  }
  const auto it = phoneme_class_.find(strip_stress(token.name));
  if (it == phoneme_class_.end()) throw UnknownTokenError(token.name);
  return it->second;
}

bool VisemeTable::is_closure(std::string_view phoneme_name) const {
  const auto it = phoneme_class_.find(strip_stress(phoneme_name));
  return it != phoneme_class_.end() && it->second == closure_class_;
}

void check_token_names(const TokenSequence& tokens, const VisemeTable& table) {
  for (const Token& t : tokens) table.viseme_of(t);
}

}  // namespace phonosynth
