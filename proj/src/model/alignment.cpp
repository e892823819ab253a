#include "phonosynth/alignment.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "phonosynth/errors.hpp"
#include "phonosynth/viseme_table.hpp"

namespace phonosynth {

namespace {

bool is_silence(std::string_view name) {
  return name == "sil" || name == "sp" || name == "SIL" || name == "SP";
}

double parse_time(const std::string& field, int line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw AlignmentError("line " + std::to_string(line_no) + ": bad time '" + field + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

TokenSequence parse_alignment(std::istream& in) {
  std::vector<Token> tokens;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream is(line);
    std::string name, start, end, extra;
    if (!(is >> name) || name[0] == '#') continue;
    if (!(is >> start >> end) || (is >> extra)) {
      throw AlignmentError("line " + std::to_string(line_no) + ": expected NAME START_S END_S");
    }
    const double s = parse_time(start, line_no);
    const double e = parse_time(end, line_no);
    if (!(e > s) || s < 0.0) {
      throw AlignmentError("line " + std::to_string(line_no) + ": non-monotonic interval");
    }
    if (!tokens.empty() && s < tokens.back().end_s) {
      throw AlignmentError("line " + std::to_string(line_no) + ": non-monotonic times (overlaps previous)");
    }
    if (is_silence(name)) continue;
    if (std::string g = canonical_gesture_name(name); !g.empty()) {
      tokens.push_back(gesture(std::move(g), s, e));
    } else {
      tokens.push_back(phoneme(std::move(name), s, e));
    }
  }
  return TokenSequence(std::move(tokens));
}

TokenSequence ingest_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw AlignmentError("cannot open alignment " + path.string());
  return parse_alignment(in);
}

void export_alignment(const TokenSequence& tokens, std::ostream& out) {
  for (const Token& t : tokens) {
    out << t.name << ' ' << format_double(t.start_s) << ' ' << format_double(t.end_s) << '\n';
  }
}

std::string export_alignment(const TokenSequence& tokens) {
  std::ostringstream os;
  export_alignment(tokens, os);
  return os.str();
}

}  // namespace phonosynth
