#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace incv::csv {

using Row = std::vector<std::string>;

/// RFC 4180 parser: quoted fields may contain commas, doubled quotes and newlines.
/// Accepts LF or CRLF line endings and skips a UTF-8 BOM.
inline std::vector<Row> parse(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool quoted = false;
    bool row_has_content = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                row_has_content = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_has_content || !field.empty()) {
                    row.push_back(std::move(field));
                    rows.push_back(std::move(row));
                }
                field.clear();
                row.clear();
                row_has_content = false;
                break;
            default:
                field += c;
                row_has_content = true;
        }
    }
    if (quoted) throw InputError("csv: unterminated quoted field");
    if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::vector<Row> read(const std::string& path) { return parse(read_file(path)); }

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void append_row(std::string& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += quote(row[i]);
    }
    out += '\n';
}

inline std::string format(const std::vector<Row>& rows) {
    std::string out;
    for (const auto& r : rows) append_row(out, r);
    return out;
}

/// Column name to index; throws ConfigError naming every missing column.
inline std::vector<std::size_t> locate(const Row& header, const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    std::string missing;
    for (const auto& n : names) {
        std::size_t found = header.size();
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == n) found = i;
        if (found == header.size()) missing += (missing.empty() ? "" : ", ") + n;
        idx.push_back(found);
    }
    if (!missing.empty()) throw ConfigError("csv header is missing columns: " + missing);
    return idx;
}

}  // namespace incv::csv
