// UTF-8 codec and NFC normalization for the Latin repertoire this project
// renders (ASCII, Western European accents, the full Vietnamese set). Not a
// general Unicode library: codepoints outside the table pass through
// untouched, which is exactly what the glyph overlay fallback needs.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scrawl {

std::vector<char32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<char32_t>& cps);

// canonical combining class; 0 for starters
int combining_class(char32_t cp);
inline bool is_combining_mark(char32_t cp) { return combining_class(cp) > 0; }

// one-level canonical decomposition into (base, mark), if any
std::optional<std::pair<char32_t, char32_t>> canonical_decomposition(char32_t cp);

// primary composite of a (starter, mark) pair, if any
std::optional<char32_t> compose_pair(char32_t starter, char32_t mark);

std::vector<char32_t> nfc_normalize(const std::vector<char32_t>& in);
std::string nfc_normalize_utf8(const std::string& s);

}  // namespace scrawl
