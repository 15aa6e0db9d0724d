// Generates the bundled bitmap font (data/fonts/scrawl8x16.hex) in the
// .hex line format: full printable ASCII, combining diacritics, Vietnamese
// lowercase precomposed letters (built by overlaying base + marks), and the
// stroke letters d/D-bar. Uppercase precomposed accents are deliberately
// omitted so the renderer's decomposition fallback stays exercised.
//
// Usage: fontgen [output-path]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "scrawl/glyphs.hpp"
#include "scrawl/unicode.hpp"

using scrawl::Bitmap16;
using scrawl::GlyphTable;

namespace {

struct Art {
  char32_t cp;
  int top;  // first row of the art inside the 16-row cell
  std::vector<std::string> rows;
};

// Art is drawn on a 5-wide grid placed at columns 1..5 of the 8-wide cell
// (columns 5..9 once centered into the 16-wide frame). Caps and digits sit on
// rows 4..10, lowercase x-height on 6..10, descenders reach 13, combining
// marks live in rows 0..2 (above) and 12..14 (below).
const std::vector<Art>& art_table() {
  static const std::vector<Art> kArt = {
      {U' ', 4, {}},
      {U'!', 4, {"..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."}},
      {U'"', 4, {".#.#.", ".#.#."}},
      {U'#', 4, {".#.#.", ".#.#.", "#####", ".#.#.", "#####", ".#.#.", ".#.#."}},
      {U'$', 4, {"..#..", ".####", "#.#..", ".###.", "..#.#", "####.", "..#.."}},
      {U'%', 4, {"##..#", "##..#", "...#.", "..#..", ".#...", "#..##", "#..##"}},
      {U'&', 4, {".##..", "#..#.", "#..#.", ".##..", "#.#.#", "#..#.", ".##.#"}},
      {U'\'', 4, {"..#..", "..#.."}},
      {U'(', 4, {"...#.", "..#..", ".#...", ".#...", ".#...", "..#..", "...#."}},
      {U')', 4, {".#...", "..#..", "...#.", "...#.", "...#.", "..#..", ".#..."}},
      {U'*', 5, {"..#..", "#.#.#", ".###.", "#.#.#", "..#.."}},
      {U'+', 6, {"..#..", "..#..", "#####", "..#..", "..#.."}},
      {U',', 9, {"..#..", "..#..", ".#..."}},
      {U'-', 7, {".###."}},
      {U'.', 9, {"..#..", "..#.."}},
      {U'/', 4, {"....#", "...#.", "..#..", "..#..", ".#...", "#....", "#...."}},
      {U'0', 4, {".###.", "#..##", "#.#.#", "##..#", "#...#", "#...#", ".###."}},
      {U'1', 4, {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
      {U'2', 4, {".###.", "#...#", "....#", "..##.", ".#...", "#....", "#####"}},
      {U'3', 4, {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
      {U'4', 4, {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
      {U'5', 4, {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
      {U'6', 4, {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
      {U'7', 4, {"#####", "....#", "...#.", "..#..", "..#..", "..#..", "..#.."}},
      {U'8', 4, {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
      {U'9', 4, {".###.", "#...#", "#...#", ".####", "....#", "..#..", ".##.."}},
      {U':', 6, {"..#..", ".....", ".....", "..#.."}},
      {U';', 6, {"..#..", ".....", ".....", "..#..", ".#..."}},
      {U'<', 4, {"...#.", "..#..", ".#...", "#....", ".#...", "..#..", "...#."}},
      {U'=', 6, {"#####", ".....", "#####"}},
      {U'>', 4, {".#...", "..#..", "...#.", "....#", "...#.", "..#..", ".#..."}},
      {U'?', 4, {".###.", "#...#", "...#.", "..#..", "..#..", ".....", "..#.."}},
      {U'@', 4, {".###.", "#...#", "#.###", "#.#.#", "#.###", "#....", ".###."}},
      {U'A', 4, {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
      {U'B', 4, {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
      {U'C', 4, {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
      {U'D', 4, {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
      {U'E', 4, {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
      {U'F', 4, {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
      {U'G', 4, {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."}},
      {U'H', 4, {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
      {U'I', 4, {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
      {U'J', 4, {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
      {U'K', 4, {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
      {U'L', 4, {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
      {U'M', 4, {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
      {U'N', 4, {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
      {U'O', 4, {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
      {U'P', 4, {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
      {U'Q', 4, {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
      {U'R', 4, {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
      {U'S', 4, {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
      {U'T', 4, {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
      {U'U', 4, {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
      {U'V', 4, {"#...#", "#...#", "#...#", "#...#", ".#.#.", ".#.#.", "..#.."}},
      {U'W', 4, {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"}},
      {U'X', 4, {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
      {U'Y', 4, {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
      {U'Z', 4, {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
      {U'[', 4, {".###.", ".#...", ".#...", ".#...", ".#...", ".#...", ".###."}},
      {U'\\', 4, {"#....", ".#...", "..#..", "..#..", "...#.", "....#", "....#"}},
      {U']', 4, {".###.", "...#.", "...#.", "...#.", "...#.", "...#.", ".###."}},
      {U'^', 4, {"..#..", ".#.#.", "#...#"}},
      {U'_', 12, {"#####"}},
      {U'`', 4, {".#...", "..#.."}},
      {U'a', 6, {".###.", "....#", ".####", "#...#", ".####"}},
      {U'b', 4, {"#....", "#....", "####.", "#...#", "#...#", "#...#", "####."}},
      {U'c', 6, {".####", "#....", "#....", "#....", ".####"}},
      {U'd', 4, {"....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"}},
      {U'e', 6, {".###.", "#...#", "#####", "#....", ".###."}},
      {U'f', 4, {"..###", ".#...", "####.", ".#...", ".#...", ".#...", ".#..."}},
      {U'g', 6, {".####", "#...#", "#...#", ".####", "....#", "....#", "#...#", ".###."}},
      {U'h', 4, {"#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#"}},
      {U'i', 4, {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."}},
      {U'j', 4, {"...#.", ".....", "..##.", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
      {U'k', 4, {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."}},
      {U'l', 4, {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
      {U'm', 6, {"##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"}},
      {U'n', 6, {"####.", "#...#", "#...#", "#...#", "#...#"}},
      {U'o', 6, {".###.", "#...#", "#...#", "#...#", ".###."}},
      {U'p', 6, {"####.", "#...#", "#...#", "####.", "#....", "#....", "#....", "#...."}},
      {U'q', 6, {".####", "#...#", "#...#", ".####", "....#", "....#", "....#", "....#"}},
      {U'r', 6, {"#.##.", "##..#", "#....", "#....", "#...."}},
      {U's', 6, {".####", "#....", ".###.", "....#", "####."}},
      {U't', 4, {".#...", ".#...", "####.", ".#...", ".#...", ".#..#", "..##."}},
      {U'u', 6, {"#...#", "#...#", "#...#", "#...#", ".####"}},
      {U'v', 6, {"#...#", "#...#", "#...#", ".#.#.", "..#.."}},
      {U'w', 6, {"#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."}},
      {U'x', 6, {"#...#", ".#.#.", "..#..", ".#.#.", "#...#"}},
      {U'y', 6, {"#...#", "#...#", "#...#", ".####", "....#", "....#", "#...#", ".###."}},
      {U'z', 6, {"#####", "...#.", "..#..", ".#...", "#####"}},
      {U'{', 4, {"..##.", ".#...", ".#...", "##...", ".#...", ".#...", "..##."}},
      {U'|', 4, {"..#..", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
      {U'}', 4, {".##..", "...#.", "...#.", "...##", "...#.", "...#.", ".##.."}},
      {U'~', 7, {".#..#", "#.#.#", "#..#."}},
      // combining marks
      {0x0300, 1, {".#...", "..#.."}},                       // grave
      {0x0301, 1, {"...#.", "..#.."}},                       // acute
      {0x0302, 1, {"..#..", ".#.#."}},                       // circumflex
      {0x0303, 1, {".#..#", "#.##."}},                       // tilde
      {0x0304, 1, {".###."}},                                // macron
      {0x0306, 1, {"#...#", ".###."}},                       // breve
      {0x0308, 1, {".#.#."}},                                // diaeresis
      {0x0309, 0, {".##..", "...#.", "..#.."}},              // hook above
      {0x030A, 0, {"..#..", ".#.#.", "..#.."}},              // ring
      {0x030C, 1, {".#.#.", "..#.."}},                       // caron
      {0x031B, 4, {"....#", "...#."}},                       // horn
      {0x0323, 12, {"..#.."}},                               // dot below
      {0x0327, 12, {"..#..", "...#.", ".##.."}},             // cedilla
      // stroke letters (no canonical decomposition)
      {0x0110, 4, {"####.", "#...#", "#...#", "###.#", "#...#", "#...#", "####."}},
      {0x0111, 4, {"....#", "..###", ".####", "#...#", "#...#", "#...#", ".####"}},
  };
  return kArt;
}

Bitmap16 draw(const Art& a) {
  Bitmap16 b;
  for (size_t r = 0; r < a.rows.size(); ++r) {
    const int y = a.top + int(r);
    for (size_t c = 0; c < a.rows[r].size(); ++c)
      if (a.rows[r][c] == '#') b.set(y, int(c) + 1 + 4, true);  // col 1 of 8-wide cell
  }
  return b;
}

const char32_t kVietnameseLower[] = {
    0x00E0, 0x00E1, 0x00E2, 0x00E3, 0x00E8, 0x00E9, 0x00EA, 0x00EC, 0x00ED,
    0x00F2, 0x00F3, 0x00F4, 0x00F5, 0x00F9, 0x00FA, 0x00FD, 0x0103, 0x0129,
    0x0169, 0x01A1, 0x01B0, 0x1EA1, 0x1EA3, 0x1EA5, 0x1EA7, 0x1EA9, 0x1EAB,
    0x1EAD, 0x1EAF, 0x1EB1, 0x1EB3, 0x1EB5, 0x1EB7, 0x1EB9, 0x1EBB, 0x1EBD,
    0x1EBF, 0x1EC1, 0x1EC3, 0x1EC5, 0x1EC7, 0x1EC9, 0x1ECB, 0x1ECD, 0x1ECF,
    0x1ED1, 0x1ED3, 0x1ED5, 0x1ED7, 0x1ED9, 0x1EDB, 0x1EDD, 0x1EDF, 0x1EE1,
    0x1EE3, 0x1EE5, 0x1EE7, 0x1EE9, 0x1EEB, 0x1EED, 0x1EEF, 0x1EF1, 0x1EF3,
    0x1EF5, 0x1EF7, 0x1EF9,
};

}  // namespace

int main(int argc, char** argv) {
  const std::string out_path = argc > 1 ? argv[1] : "data/fonts/scrawl8x16.hex";

  GlyphTable table;
  table.source_path = out_path;
  for (const Art& a : art_table())
    table.entries[a.cp] = {draw(a), 8};

  for (char32_t cp : kVietnameseLower) {
    // compose from parts; render_char walks the decomposition chain
    Bitmap16 b = scrawl::render_char(table, cp);
    table.entries[cp] = {b, 8};
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "fontgen: cannot write " << out_path << "\n";
    return 1;
  }
  out << scrawl::serialize_hex_font(table);
  std::cout << "fontgen: wrote " << table.entries.size() << " glyphs to " << out_path
            << "\n";
  return 0;
}
