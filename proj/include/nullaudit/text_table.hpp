#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nullaudit {

/// Splits one delimited line. Fields wrapped in double quotes may contain
/// the delimiter; doubled quotes inside them unescape to one.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

/// Removes one pair of surrounding double quotes, if present.
std::string unquote(std::string_view field);

std::string_view trim(std::string_view s);

/// Tab when the header contains one, otherwise comma.
char sniff_delimiter(std::string_view header);

/// Missing-value tokens: empty, "NA", "NaN", "null" (any case).
bool is_missing_token(std::string_view field);

/// Strict full-field parse of a finite or infinite real.
std::optional<double> parse_real(std::string_view field);

/// Shortest decimal text that reads back to the same double.
std::string format_real(double value);

/// Reads a whole file, transparently decompressing gzip. Throws IoError.
std::string read_text_file(const std::string& path);

/// getline that also strips a trailing '\r'.
bool read_line(std::istream& in, std::string& line);

}  // namespace nullaudit
