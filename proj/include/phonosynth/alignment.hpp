#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "phonosynth/token.hpp"

namespace phonosynth {

// Forced-alignment output: one `NAME START_S END_S` line per phoneme.
// Blank lines and `#` comments are skipped, as are the silence labels
// `sil`, `sp` and `SIL`, which become gaps.
TokenSequence parse_alignment(std::istream& in);
TokenSequence ingest_alignment(const std::filesystem::path& path);

// Writes times with shortest round-trip formatting so that
// parse_alignment(export_alignment(x)) == x.
void export_alignment(const TokenSequence& tokens, std::ostream& out);
std::string export_alignment(const TokenSequence& tokens);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace phonosynth
