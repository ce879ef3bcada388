#include "nullaudit/text_table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>

#include <zlib.h>

#include "nullaudit/error.hpp"

namespace nullaudit {

std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool field_start = true;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == delimiter) {
            fields.push_back(std::move(current));
            current.clear();
            field_start = true;
            continue;
        } else if (c == '"' && field_start) {
            quoted = true;
        } else {
            current += c;
        }
        field_start = false;
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string unquote(std::string_view field) {
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
        return std::string(field.substr(1, field.size() - 2));
    return std::string(field);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

char sniff_delimiter(std::string_view header) {
    return header.find('\t') != std::string_view::npos ? '\t' : ',';
}

bool is_missing_token(std::string_view field) {
    field = trim(field);
    if (field.empty()) return true;
    std::string lower(field);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "na" || lower == "nan" || lower == "null";
}

std::optional<double> parse_real(std::string_view field) {
    field = trim(field);
    if (field.empty()) return std::nullopt;
    if (field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) return std::nullopt;
    return value;
}

std::string format_real(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    std::string out(buffer, ptr);
    if (std::isfinite(value) && out.find_first_of(".e") == std::string::npos) out += ".0";
    return out;
}

std::string read_text_file(const std::string& path) {
    gzFile file = gzopen(path.c_str(), "rb");
    if (!file) throw IoError("OpenFailed", "cannot open " + path + ": " + std::strerror(errno));
    std::string out;
    char buffer[1 << 16];
    int n = 0;
    while ((n = gzread(file, buffer, sizeof(buffer))) > 0) out.append(buffer, static_cast<std::size_t>(n));
    int err = 0;
    const char* message = gzerror(file, &err);
    const bool failed = n < 0 || (err != Z_OK && err != Z_STREAM_END);
    const std::string detail = failed ? message : "";
    gzclose(file);
    if (failed) throw IoError("ReadFailed", "cannot read " + path + ": " + detail);
    return out;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace nullaudit
