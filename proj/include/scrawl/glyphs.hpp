// Bitmap font handling: GNU-Unifont-format .hex parsing, glyph lookup with
// canonical-decomposition overlay fallback, and text -> content-token
// rendering with sinusoidal positions.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scrawl/nn.hpp"
#include "scrawl/tensor.hpp"

namespace scrawl {

struct Bitmap16 {
  std::array<uint16_t, 16> rows{};  // bit (15 - x) of rows[y] is pixel (y, x)

  bool get(int y, int x) const { return (rows[size_t(y)] >> (15 - x)) & 1u; }
  void set(int y, int x, bool v) {
    const uint16_t m = uint16_t(1u << (15 - x));
    if (v)
      rows[size_t(y)] |= m;
    else
      rows[size_t(y)] &= uint16_t(~m);
  }
  int ink_count() const {
    int n = 0;
    for (uint16_t r : rows) n += __builtin_popcount(r);
    return n;
  }
  Bitmap16 or_with(const Bitmap16& o) const {
    Bitmap16 r = *this;
    for (size_t i = 0; i < 16; ++i) r.rows[i] |= o.rows[i];
    return r;
  }
  bool operator==(const Bitmap16& o) const { return rows == o.rows; }
};

struct GlyphTable {
  struct Entry {
    Bitmap16 bitmap;
    int native_width = 16;  // 8 or 16, as stored in the source file
  };
  std::map<char32_t, Entry> entries;
  std::string source_path;

  const Entry* find(char32_t cp) const {
    auto it = entries.find(cp);
    return it == entries.end() ? nullptr : &it->second;
  }
};

// Parses a .hex font file: `CODEPOINT:PAYLOAD` per line, payload 32 hex digits
// (8-wide glyph, horizontally centered into the 16-wide frame) or 64 hex
// digits (16-wide, copied verbatim).
GlyphTable load_hex_font(const std::string& path);
GlyphTable parse_hex_font(const std::string& text, const std::string& origin);

// Inverse of parsing; 8-wide entries are emitted back as 8-wide lines.
std::string serialize_hex_font(const GlyphTable& table);

// Table lookup with decomposition fallback: absent precomposed characters are
// rendered as base OR marks. Throws MissingGlyphError when unrenderable.
Bitmap16 render_char(const GlyphTable& table, char32_t cp);

struct ContentSequence {
  std::vector<Bitmap16> glyphs;  // one per token
  std::string text;              // NFC-normalized UTF-8
  int d_model = 0;

  int length() const { return int(glyphs.size()); }

  // L x 256 matrix of {0,1}, each row a flattened bitmap
  template <class T>
  Tensor<T> tokens() const {
    Tensor<T> t({length(), 256});
    for (int i = 0; i < length(); ++i)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
          t.at(i, y * 16 + x) = glyphs[size_t(i)].get(y, x) ? T(1) : T(0);
    return t;
  }

  // L x d_model sinusoidal positions
  template <class T>
  Tensor<T> positions() const {
    return sinusoidal_pe<T>(length(), d_model);
  }
};

// NFC-normalizes s, then emits one token per codepoint with combining marks
// OR-merged into their base.
ContentSequence render_text(const GlyphTable& table, const std::string& s, int d_model);

std::string ascii_art(const Bitmap16& b, char ink = '#', char blank = '.');

}  // namespace scrawl
