#pragma once

#include "common.hpp"

#include <fstream>
#include <sstream>

namespace sweepscope {

using CsvRow = std::vector<std::string>;

inline std::string csv_escape(const std::string& field)
{
    if (field.find_first_of(",\"\r\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_line(const CsvRow& row)
{
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i)
            out += ',';
        out += csv_escape(row[i]);
    }
    out += '\n';
    return out;
}

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
inline std::vector<CsvRow> parse_csv(std::string_view text)
{
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool quoted = false, any = false;
    std::size_t i = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF")
        i = 3;
    for (; i < text.size(); ++i) {
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
            any = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            any = true;
            break;
        case '\r':
            break;
        case '\n':
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row.clear();
            any = false;
            break;
        default:
            field += c;
            any = true;
        }
    }
    if (quoted)
        throw InvalidArgument("unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFound("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw Error("write failed for '" + path + "'");
}

inline std::vector<CsvRow> read_csv(const std::string& path) { return parse_csv(read_file(path)); }

inline void write_csv(const std::string& path, const std::vector<CsvRow>& rows)
{
    std::string out;
    for (const auto& r : rows)
        out += csv_line(r);
    write_file(path, out);
}

/// Column index of `name` in a header row.
inline std::size_t csv_column(const CsvRow& header, const std::string& name)
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw NotFound("CSV column '" + name + "' not found");
}

}  // namespace sweepscope
