#include "scrawl/glyphs.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "scrawl/errors.hpp"
#include "scrawl/unicode.hpp"

namespace scrawl {

namespace {

int hex_nibble(char c, int line_no) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  throw ParseError(std::string("invalid hex digit '") + c + "'", line_no);
}

}  // namespace

GlyphTable parse_hex_font(const std::string& text, const std::string& origin) {
  GlyphTable table;
  table.source_path = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("missing ':' in hex font line", line_no);
    if (colon == 0 || colon > 6)
      throw ParseError("codepoint field must be 1..6 hex digits", line_no);
    char32_t cp = 0;
    for (size_t i = 0; i < colon; ++i)
      cp = (cp << 4) | char32_t(hex_nibble(line[i], line_no));
    const std::string payload = line.substr(colon + 1);
    if (payload.size() != 32 && payload.size() != 64)
      throw ParseError("payload must be 32 or 64 hex digits, got " +
                           std::to_string(payload.size()),
                       line_no);
    GlyphTable::Entry entry;
    if (payload.size() == 32) {
      // 8-wide: two hex digits per row, centered into columns 4..11
      entry.native_width = 8;
      for (int y = 0; y < 16; ++y) {
        const int hi = hex_nibble(payload[size_t(y * 2)], line_no);
        const int lo = hex_nibble(payload[size_t(y * 2 + 1)], line_no);
        const uint16_t bits8 = uint16_t((hi << 4) | lo);
        entry.bitmap.rows[size_t(y)] = uint16_t(bits8 << 4);
      }
    } else {
      entry.native_width = 16;
      for (int y = 0; y < 16; ++y) {
        uint16_t r = 0;
        for (int k = 0; k < 4; ++k)
          r = uint16_t((r << 4) | hex_nibble(payload[size_t(y * 4 + k)], line_no));
        entry.bitmap.rows[size_t(y)] = r;
      }
    }
    if (!table.entries.emplace(cp, entry).second) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "duplicate codepoint U+%04X", unsigned(cp));
      throw ParseError(buf, line_no);
    }
  }
  if (table.entries.empty())
    throw DataError("hex font '" + origin + "' contains no glyphs");
  return table;
}

GlyphTable load_hex_font(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open font file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_hex_font(ss.str(), path);
}

std::string serialize_hex_font(const GlyphTable& table) {
  std::ostringstream out;
  char buf[16];
  for (const auto& [cp, entry] : table.entries) {
    if (cp > 0xFFFF)
      std::snprintf(buf, sizeof buf, "%06X", unsigned(cp));
    else
      std::snprintf(buf, sizeof buf, "%04X", unsigned(cp));
    out << buf << ':';
    if (entry.native_width == 8) {
      for (int y = 0; y < 16; ++y) {
        std::snprintf(buf, sizeof buf, "%02X",
                      unsigned(entry.bitmap.rows[size_t(y)] >> 4) & 0xFFu);
        out << buf;
      }
    } else {
      for (int y = 0; y < 16; ++y) {
        std::snprintf(buf, sizeof buf, "%04X", unsigned(entry.bitmap.rows[size_t(y)]));
        out << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

Bitmap16 render_char(const GlyphTable& table, char32_t cp) {
  if (const auto* e = table.find(cp)) return e->bitmap;
  // overlay fallback: base OR marks via canonical decomposition
  if (auto d = canonical_decomposition(cp)) {
    const Bitmap16 base = render_char(table, d->first);
    const auto* mark = table.find(d->second);
    if (!mark) throw MissingGlyphError(d->second);
    return base.or_with(mark->bitmap);
  }
  throw MissingGlyphError(cp);
}

ContentSequence render_text(const GlyphTable& table, const std::string& s, int d_model) {
  if (d_model < 2 || d_model % 2 != 0)
    throw ConfigError("render_text: d_model must be even and >= 2");
  const std::vector<char32_t> cps = nfc_normalize(utf8_decode(s));
  if (cps.empty()) throw DataError("render_text: empty string after normalization");

  ContentSequence seq;
  seq.d_model = d_model;
  seq.text = utf8_encode(cps);
  for (char32_t cp : cps) {
    if (is_combining_mark(cp) && !seq.glyphs.empty()) {
      const auto* mark = table.find(cp);
      if (!mark) throw MissingGlyphError(cp);
      seq.glyphs.back() = seq.glyphs.back().or_with(mark->bitmap);
    } else {
      seq.glyphs.push_back(render_char(table, cp));
    }
  }
  return seq;
}

std::string ascii_art(const Bitmap16& b, char ink, char blank) {
  std::string out;
  out.reserve(16 * 17);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) out.push_back(b.get(y, x) ? ink : blank);
    out.push_back('\n');
  }
  return out;
}

}  // namespace scrawl
