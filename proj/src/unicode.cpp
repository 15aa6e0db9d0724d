#include "scrawl/unicode.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <unordered_map>

#include "scrawl/errors.hpp"

namespace scrawl {

std::vector<char32_t> utf8_decode(const std::string& s) {
  std::vector<char32_t> out;
  size_t i = 0;
  const size_t n = s.size();
  while (i < n) {
    const unsigned char b0 = (unsigned char)s[i];
    char32_t cp = 0;
    int extra = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      throw DataError("utf8_decode: invalid lead byte at offset " + std::to_string(i));
    }
    if (extra > 0 && i + size_t(extra) >= n)
      throw DataError("utf8_decode: truncated sequence at offset " + std::to_string(i));
    for (int k = 1; k <= extra; ++k) {
      const unsigned char b = (unsigned char)s[i + size_t(k)];
      if ((b & 0xC0) != 0x80)
        throw DataError("utf8_decode: bad continuation at offset " +
                        std::to_string(i + size_t(k)));
      cp = (cp << 6) | (b & 0x3F);
    }
    // reject overlong encodings and surrogates
    static constexpr char32_t kMin[4] = {0, 0x80, 0x800, 0x10000};
    if (extra > 0 && cp < kMin[extra])
      throw DataError("utf8_decode: overlong encoding at offset " + std::to_string(i));
    if (cp >= 0xD800 && cp <= 0xDFFF)
      throw DataError("utf8_decode: surrogate codepoint at offset " + std::to_string(i));
    out.push_back(cp);
    i += size_t(extra) + 1;
  }
  return out;
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(char(cp));
    } else if (cp < 0x800) {
      out.push_back(char(0xC0 | (cp >> 6)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(char(0xE0 | (cp >> 12)));
      out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(char(0xF0 | (cp >> 18)));
      out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

int combining_class(char32_t cp) {
  // Combining Diacritical Marks block, per UnicodeData
  if (cp < 0x0300 || cp > 0x036F) return 0;
  if (cp <= 0x0314) return 230;
  if (cp == 0x0315) return 232;
  if (cp <= 0x0319) return 220;
  if (cp == 0x031A) return 232;
  if (cp == 0x031B) return 216;
  if (cp <= 0x0320) return 220;
  if (cp <= 0x0322) return 202;
  if (cp <= 0x0326) return 220;
  if (cp <= 0x0328) return 202;
  if (cp <= 0x0333) return 220;
  if (cp <= 0x0338) return 1;
  if (cp <= 0x033C) return 220;
  if (cp <= 0x0344) return 230;
  if (cp == 0x0345) return 240;
  if (cp == 0x0346) return 230;
  if (cp <= 0x0349) return 220;
  if (cp <= 0x034C) return 230;
  if (cp <= 0x034E) return 220;
  if (cp == 0x034F) return 0;
  if (cp <= 0x0352) return 230;
  if (cp <= 0x0356) return 220;
  if (cp == 0x0357) return 230;
  if (cp == 0x0358) return 232;
  if (cp <= 0x035A) return 220;
  if (cp == 0x035B) return 230;
  if (cp == 0x035C) return 233;
  if (cp <= 0x035E) return 234;
  if (cp == 0x035F) return 233;
  if (cp <= 0x0361) return 234;
  if (cp == 0x0362) return 233;
  return 230;  // 0363..036F
}

namespace {

struct DecompEntry {
  char32_t composed, base, mark;
};

// Canonical decompositions (UnicodeData.txt) for Latin-1 accents, the Latin
// Extended A/B letters used by Vietnamese and common European text, and the
// entire Vietnamese block U+1EA0..U+1EF9.
constexpr DecompEntry kDecomp[] = {
    {0x00C0, 0x0041, 0x0300}, {0x00C1, 0x0041, 0x0301}, {0x00C2, 0x0041, 0x0302},
    {0x00C3, 0x0041, 0x0303}, {0x00C4, 0x0041, 0x0308}, {0x00C5, 0x0041, 0x030A},
    {0x00C7, 0x0043, 0x0327}, {0x00C8, 0x0045, 0x0300}, {0x00C9, 0x0045, 0x0301},
    {0x00CA, 0x0045, 0x0302}, {0x00CB, 0x0045, 0x0308}, {0x00CC, 0x0049, 0x0300},
    {0x00CD, 0x0049, 0x0301}, {0x00CE, 0x0049, 0x0302}, {0x00CF, 0x0049, 0x0308},
    {0x00D1, 0x004E, 0x0303}, {0x00D2, 0x004F, 0x0300}, {0x00D3, 0x004F, 0x0301},
    {0x00D4, 0x004F, 0x0302}, {0x00D5, 0x004F, 0x0303}, {0x00D6, 0x004F, 0x0308},
    {0x00D9, 0x0055, 0x0300}, {0x00DA, 0x0055, 0x0301}, {0x00DB, 0x0055, 0x0302},
    {0x00DC, 0x0055, 0x0308}, {0x00DD, 0x0059, 0x0301},
    {0x00E0, 0x0061, 0x0300}, {0x00E1, 0x0061, 0x0301}, {0x00E2, 0x0061, 0x0302},
    {0x00E3, 0x0061, 0x0303}, {0x00E4, 0x0061, 0x0308}, {0x00E5, 0x0061, 0x030A},
    {0x00E7, 0x0063, 0x0327}, {0x00E8, 0x0065, 0x0300}, {0x00E9, 0x0065, 0x0301},
    {0x00EA, 0x0065, 0x0302}, {0x00EB, 0x0065, 0x0308}, {0x00EC, 0x0069, 0x0300},
    {0x00ED, 0x0069, 0x0301}, {0x00EE, 0x0069, 0x0302}, {0x00EF, 0x0069, 0x0308},
    {0x00F1, 0x006E, 0x0303}, {0x00F2, 0x006F, 0x0300}, {0x00F3, 0x006F, 0x0301},
    {0x00F4, 0x006F, 0x0302}, {0x00F5, 0x006F, 0x0303}, {0x00F6, 0x006F, 0x0308},
    {0x00F9, 0x0075, 0x0300}, {0x00FA, 0x0075, 0x0301}, {0x00FB, 0x0075, 0x0302},
    {0x00FC, 0x0075, 0x0308}, {0x00FD, 0x0079, 0x0301}, {0x00FF, 0x0079, 0x0308},
    // Latin Extended-A (subset)
    {0x0100, 0x0041, 0x0304}, {0x0101, 0x0061, 0x0304}, {0x0102, 0x0041, 0x0306},
    {0x0103, 0x0061, 0x0306}, {0x0106, 0x0043, 0x0301}, {0x0107, 0x0063, 0x0301},
    {0x0112, 0x0045, 0x0304}, {0x0113, 0x0065, 0x0304}, {0x0128, 0x0049, 0x0303},
    {0x0129, 0x0069, 0x0303}, {0x012A, 0x0049, 0x0304}, {0x012B, 0x0069, 0x0304},
    {0x014C, 0x004F, 0x0304}, {0x014D, 0x006F, 0x0304}, {0x0168, 0x0055, 0x0303},
    {0x0169, 0x0075, 0x0303}, {0x016A, 0x0055, 0x0304}, {0x016B, 0x0075, 0x0304},
    {0x0108, 0x0043, 0x0302}, {0x0109, 0x0063, 0x0302}, {0x010C, 0x0043, 0x030C},
    {0x010D, 0x0063, 0x030C}, {0x010E, 0x0044, 0x030C}, {0x010F, 0x0064, 0x030C},
    {0x0114, 0x0045, 0x0306}, {0x0115, 0x0065, 0x0306}, {0x011A, 0x0045, 0x030C},
    {0x011B, 0x0065, 0x030C}, {0x011C, 0x0047, 0x0302}, {0x011D, 0x0067, 0x0302},
    {0x011E, 0x0047, 0x0306}, {0x011F, 0x0067, 0x0306}, {0x0122, 0x0047, 0x0327},
    {0x0123, 0x0067, 0x0327}, {0x0124, 0x0048, 0x0302}, {0x0125, 0x0068, 0x0302},
    {0x012C, 0x0049, 0x0306}, {0x012D, 0x0069, 0x0306}, {0x0134, 0x004A, 0x0302},
    {0x0135, 0x006A, 0x0302}, {0x0136, 0x004B, 0x0327}, {0x0137, 0x006B, 0x0327},
    {0x0139, 0x004C, 0x0301}, {0x013A, 0x006C, 0x0301}, {0x013B, 0x004C, 0x0327},
    {0x013C, 0x006C, 0x0327}, {0x013D, 0x004C, 0x030C}, {0x013E, 0x006C, 0x030C},
    {0x0143, 0x004E, 0x0301}, {0x0144, 0x006E, 0x0301}, {0x0145, 0x004E, 0x0327},
    {0x0146, 0x006E, 0x0327}, {0x0147, 0x004E, 0x030C}, {0x0148, 0x006E, 0x030C},
    {0x014E, 0x004F, 0x0306}, {0x014F, 0x006F, 0x0306}, {0x0154, 0x0052, 0x0301},
    {0x0155, 0x0072, 0x0301}, {0x0156, 0x0052, 0x0327}, {0x0157, 0x0072, 0x0327},
    {0x0158, 0x0052, 0x030C}, {0x0159, 0x0072, 0x030C}, {0x015A, 0x0053, 0x0301},
    {0x015B, 0x0073, 0x0301}, {0x015C, 0x0053, 0x0302}, {0x015D, 0x0073, 0x0302},
    {0x015E, 0x0053, 0x0327}, {0x015F, 0x0073, 0x0327}, {0x0160, 0x0053, 0x030C},
    {0x0161, 0x0073, 0x030C}, {0x0162, 0x0054, 0x0327}, {0x0163, 0x0074, 0x0327},
    {0x0164, 0x0054, 0x030C}, {0x0165, 0x0074, 0x030C}, {0x016C, 0x0055, 0x0306},
    {0x016D, 0x0075, 0x0306}, {0x016E, 0x0055, 0x030A}, {0x016F, 0x0075, 0x030A},
    {0x0174, 0x0057, 0x0302}, {0x0175, 0x0077, 0x0302}, {0x0176, 0x0059, 0x0302},
    {0x0177, 0x0079, 0x0302}, {0x0178, 0x0059, 0x0308}, {0x0179, 0x005A, 0x0301},
    {0x017A, 0x007A, 0x0301}, {0x017D, 0x005A, 0x030C}, {0x017E, 0x007A, 0x030C},
    // Latin Extended-B horns and grave n
    {0x01A0, 0x004F, 0x031B}, {0x01A1, 0x006F, 0x031B},
    {0x01AF, 0x0055, 0x031B}, {0x01B0, 0x0075, 0x031B},
    {0x01F8, 0x004E, 0x0300}, {0x01F9, 0x006E, 0x0300},
    // Latin Extended Additional (outside the Vietnamese block)
    {0x1E0C, 0x0044, 0x0323}, {0x1E0D, 0x0064, 0x0323},
    {0x1E24, 0x0048, 0x0323}, {0x1E25, 0x0068, 0x0323},
    {0x1E36, 0x004C, 0x0323}, {0x1E37, 0x006C, 0x0323},
    {0x1E3E, 0x004D, 0x0301}, {0x1E3F, 0x006D, 0x0301},
    {0x1E42, 0x004D, 0x0323}, {0x1E43, 0x006D, 0x0323},
    {0x1E46, 0x004E, 0x0323}, {0x1E47, 0x006E, 0x0323},
    {0x1E5A, 0x0052, 0x0323}, {0x1E5B, 0x0072, 0x0323},
    {0x1E62, 0x0053, 0x0323}, {0x1E63, 0x0073, 0x0323},
    {0x1E6C, 0x0054, 0x0323}, {0x1E6D, 0x0074, 0x0323},
    {0x1E7E, 0x0056, 0x0323}, {0x1E7F, 0x0076, 0x0323},
    {0x1E80, 0x0057, 0x0300}, {0x1E81, 0x0077, 0x0300},
    {0x1E82, 0x0057, 0x0301}, {0x1E83, 0x0077, 0x0301},
    {0x1E84, 0x0057, 0x0308}, {0x1E85, 0x0077, 0x0308},
    {0x1E88, 0x0057, 0x0323}, {0x1E89, 0x0077, 0x0323},
    {0x1E90, 0x005A, 0x0302}, {0x1E91, 0x007A, 0x0302},
    {0x1E92, 0x005A, 0x0323}, {0x1E93, 0x007A, 0x0323},
    // Vietnamese block
    {0x1EA0, 0x0041, 0x0323}, {0x1EA1, 0x0061, 0x0323},
    {0x1EA2, 0x0041, 0x0309}, {0x1EA3, 0x0061, 0x0309},
    {0x1EA4, 0x00C2, 0x0301}, {0x1EA5, 0x00E2, 0x0301},
    {0x1EA6, 0x00C2, 0x0300}, {0x1EA7, 0x00E2, 0x0300},
    {0x1EA8, 0x00C2, 0x0309}, {0x1EA9, 0x00E2, 0x0309},
    {0x1EAA, 0x00C2, 0x0303}, {0x1EAB, 0x00E2, 0x0303},
    {0x1EAC, 0x1EA0, 0x0302}, {0x1EAD, 0x1EA1, 0x0302},
    {0x1EAE, 0x0102, 0x0301}, {0x1EAF, 0x0103, 0x0301},
    {0x1EB0, 0x0102, 0x0300}, {0x1EB1, 0x0103, 0x0300},
    {0x1EB2, 0x0102, 0x0309}, {0x1EB3, 0x0103, 0x0309},
    {0x1EB4, 0x0102, 0x0303}, {0x1EB5, 0x0103, 0x0303},
    {0x1EB6, 0x1EA0, 0x0306}, {0x1EB7, 0x1EA1, 0x0306},
    {0x1EB8, 0x0045, 0x0323}, {0x1EB9, 0x0065, 0x0323},
    {0x1EBA, 0x0045, 0x0309}, {0x1EBB, 0x0065, 0x0309},
    {0x1EBC, 0x0045, 0x0303}, {0x1EBD, 0x0065, 0x0303},
    {0x1EBE, 0x00CA, 0x0301}, {0x1EBF, 0x00EA, 0x0301},
    {0x1EC0, 0x00CA, 0x0300}, {0x1EC1, 0x00EA, 0x0300},
    {0x1EC2, 0x00CA, 0x0309}, {0x1EC3, 0x00EA, 0x0309},
    {0x1EC4, 0x00CA, 0x0303}, {0x1EC5, 0x00EA, 0x0303},
    {0x1EC6, 0x1EB8, 0x0302}, {0x1EC7, 0x1EB9, 0x0302},
    {0x1EC8, 0x0049, 0x0309}, {0x1EC9, 0x0069, 0x0309},
    {0x1ECA, 0x0049, 0x0323}, {0x1ECB, 0x0069, 0x0323},
    {0x1ECC, 0x004F, 0x0323}, {0x1ECD, 0x006F, 0x0323},
    {0x1ECE, 0x004F, 0x0309}, {0x1ECF, 0x006F, 0x0309},
    {0x1ED0, 0x00D4, 0x0301}, {0x1ED1, 0x00F4, 0x0301},
    {0x1ED2, 0x00D4, 0x0300}, {0x1ED3, 0x00F4, 0x0300},
    {0x1ED4, 0x00D4, 0x0309}, {0x1ED5, 0x00F4, 0x0309},
    {0x1ED6, 0x00D4, 0x0303}, {0x1ED7, 0x00F4, 0x0303},
    {0x1ED8, 0x1ECC, 0x0302}, {0x1ED9, 0x1ECD, 0x0302},
    {0x1EDA, 0x01A0, 0x0301}, {0x1EDB, 0x01A1, 0x0301},
    {0x1EDC, 0x01A0, 0x0300}, {0x1EDD, 0x01A1, 0x0300},
    {0x1EDE, 0x01A0, 0x0309}, {0x1EDF, 0x01A1, 0x0309},
    {0x1EE0, 0x01A0, 0x0303}, {0x1EE1, 0x01A1, 0x0303},
    {0x1EE2, 0x01A0, 0x0323}, {0x1EE3, 0x01A1, 0x0323},
    {0x1EE4, 0x0055, 0x0323}, {0x1EE5, 0x0075, 0x0323},
    {0x1EE6, 0x0055, 0x0309}, {0x1EE7, 0x0075, 0x0309},
    {0x1EE8, 0x01AF, 0x0301}, {0x1EE9, 0x01B0, 0x0301},
    {0x1EEA, 0x01AF, 0x0300}, {0x1EEB, 0x01B0, 0x0300},
    {0x1EEC, 0x01AF, 0x0309}, {0x1EED, 0x01B0, 0x0309},
    {0x1EEE, 0x01AF, 0x0303}, {0x1EEF, 0x01B0, 0x0303},
    {0x1EF0, 0x01AF, 0x0323}, {0x1EF1, 0x01B0, 0x0323},
    {0x1EF2, 0x0059, 0x0300}, {0x1EF3, 0x0079, 0x0300},
    {0x1EF4, 0x0059, 0x0323}, {0x1EF5, 0x0079, 0x0323},
    {0x1EF6, 0x0059, 0x0309}, {0x1EF7, 0x0079, 0x0309},
    {0x1EF8, 0x0059, 0x0303}, {0x1EF9, 0x0079, 0x0303},
};

const std::unordered_map<char32_t, std::pair<char32_t, char32_t>>& decomp_map() {
  static const auto* m = [] {
    auto* mm = new std::unordered_map<char32_t, std::pair<char32_t, char32_t>>();
    for (const auto& e : kDecomp) (*mm)[e.composed] = {e.base, e.mark};
    return mm;
  }();
  return *m;
}

const std::unordered_map<uint64_t, char32_t>& compose_map() {
  static const auto* m = [] {
    auto* mm = new std::unordered_map<uint64_t, char32_t>();
    for (const auto& e : kDecomp)
      (*mm)[(uint64_t(e.base) << 32) | e.mark] = e.composed;
    return mm;
  }();
  return *m;
}

}  // namespace

std::optional<std::pair<char32_t, char32_t>> canonical_decomposition(char32_t cp) {
  const auto& m = decomp_map();
  auto it = m.find(cp);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::optional<char32_t> compose_pair(char32_t starter, char32_t mark) {
  const auto& m = compose_map();
  auto it = m.find((uint64_t(starter) << 32) | mark);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::vector<char32_t> nfc_normalize(const std::vector<char32_t>& in) {
  // 1. full canonical decomposition
  std::vector<char32_t> dec;
  dec.reserve(in.size() * 2);
  for (char32_t cp : in) {
    std::vector<char32_t> stack{cp};
    std::vector<char32_t> expanded;
    while (!stack.empty()) {
      const char32_t c = stack.back();
      stack.pop_back();
      if (auto d = canonical_decomposition(c)) {
        stack.push_back(d->second);  // mark processed after base
        stack.push_back(d->first);
      } else {
        expanded.push_back(c);
      }
    }
    dec.insert(dec.end(), expanded.begin(), expanded.end());
  }

  // 2. canonical ordering (stable bubble over nonzero combining classes)
  for (size_t i = 1; i < dec.size(); ++i) {
    size_t j = i;
    while (j > 0) {
      const int ca = combining_class(dec[j - 1]);
      const int cb = combining_class(dec[j]);
      if (ca > cb && cb != 0) {
        std::swap(dec[j - 1], dec[j]);
        --j;
      } else {
        break;
      }
    }
  }

  // 3. canonical recomposition
  std::vector<char32_t> out;
  int last_starter = -1;
  for (char32_t c : dec) {
    const int cc = combining_class(c);
    if (last_starter >= 0) {
      const bool adjacent = int(out.size()) - 1 == last_starter;
      const bool blocked = !adjacent && combining_class(out.back()) >= cc;
      if (!blocked) {
        if (auto p = compose_pair(out[size_t(last_starter)], c)) {
          out[size_t(last_starter)] = *p;
          continue;
        }
      }
    }
    out.push_back(c);
    if (cc == 0) last_starter = int(out.size()) - 1;
  }
  return out;
}

std::string nfc_normalize_utf8(const std::string& s) {
  return utf8_encode(nfc_normalize(utf8_decode(s)));
}

}  // namespace scrawl
