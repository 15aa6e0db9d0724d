// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
#pragma once

#include <stdexcept>
#include <string>

namespace scrawl {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : DataError {
  int line = 0;
  ParseError(const std::string& msg, int line_no)
      : DataError(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

struct MissingGlyphError : DataError {
  char32_t codepoint;
  explicit MissingGlyphError(char32_t cp)
      : DataError(format_msg(cp)), codepoint(cp) {}

 private:
  static std::string format_msg(char32_t cp) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "no glyph for U+%04X", unsigned(cp));
    return buf;
  }
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scrawl
