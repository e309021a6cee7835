#pragma once

#include "common.hpp"
#include "core_model.hpp"
#include "csv.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <set>

namespace sweepscope {

using Json = nlohmann::json;

inline std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

struct CsvTableOptions {
    std::string id_column;                       // empty: generated ids
    std::string text_column;                     // set: text table
    std::vector<std::string> feature_columns;    // empty: every remaining column
    std::vector<std::string> attribute_columns;  // passed through untouched
    std::vector<std::string> ignore_columns;
};

/// Raw (unvalidated) table from CSV text.
inline ItemTable table_from_csv(std::string_view text, const CsvTableOptions& o)
{
    const auto rows = parse_csv(text);
    if (rows.empty())
        throw InvalidArgument("CSV input is empty");
    const auto& header = rows.front();
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].size() != header.size())
            throw InvalidArgument("CSV row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                  " fields, header has " + std::to_string(header.size()));
    ItemTable t;
    const std::size_t n = rows.size() - 1;
    if (!o.id_column.empty()) {
        const auto c = csv_column(header, o.id_column);
        for (std::size_t r = 1; r < rows.size(); ++r)
            t.item_ids.push_back(rows[r][c]);
    }
    for (const auto& name : o.attribute_columns) {
        const auto c = csv_column(header, name);
        Attribute a{name, {}};
        for (std::size_t r = 1; r < rows.size(); ++r)
            a.values.push_back(rows[r][c]);
        t.attributes.push_back(std::move(a));
    }
    if (!o.text_column.empty()) {
        t.kind = TableKind::text;
        const auto c = csv_column(header, o.text_column);
        for (std::size_t r = 1; r < rows.size(); ++r)
            t.documents.push_back(rows[r][c]);
        return t;
    }
    std::vector<std::string> names = o.feature_columns;
    if (names.empty()) {
        std::set<std::string> skip(o.attribute_columns.begin(), o.attribute_columns.end());
        skip.insert(o.ignore_columns.begin(), o.ignore_columns.end());
        if (!o.id_column.empty())
            skip.insert(o.id_column);
        for (const auto& h : header)
            if (!skip.count(h))
                names.push_back(h);
    }
    if (names.empty())
        throw InvalidArgument("CSV has no feature columns");
    t.kind = TableKind::numeric;
    t.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
    for (std::size_t f = 0; f < names.size(); ++f) {
        const auto c = csv_column(header, names[f]);
        for (std::size_t r = 1; r < rows.size(); ++r) {
            try {
                t.features(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(f)) = parse_double(rows[r][c]);
            } catch (const InvalidArgument&) {
                throw InvalidArgument("column '" + names[f] + "' row " + std::to_string(r) + " is not numeric");
            }
        }
    }
    t.feature_names = std::move(names);
    return t;
}

struct JsonlTableOptions {
    std::string id_field;
    std::string text_field = "text";
    std::vector<std::string> attribute_fields;
};

inline std::string json_scalar_string(const Json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_null())
        return "";
    return v.dump();
}

/// Raw text table from JSON Lines, one object per document.
inline ItemTable table_from_jsonl(std::string_view text, const JsonlTableOptions& o)
{
    ItemTable t;
    t.kind = TableKind::text;
    for (const auto& name : o.attribute_fields)
        t.attributes.push_back({name, {}});
    std::size_t line_no = 0, start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;
        Json obj;
        try {
            obj = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw InvalidArgument("JSONL line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains(o.text_field))
            throw InvalidArgument("JSONL line " + std::to_string(line_no) + " lacks field '" + o.text_field + "'");
        t.documents.push_back(json_scalar_string(obj[o.text_field]));
        if (!o.id_field.empty()) {
            if (!obj.contains(o.id_field))
                throw InvalidArgument("JSONL line " + std::to_string(line_no) + " lacks field '" + o.id_field + "'");
            t.item_ids.push_back(json_scalar_string(obj[o.id_field]));
        }
        for (auto& a : t.attributes)
            a.values.push_back(obj.contains(a.name) ? json_scalar_string(obj[a.name]) : "");
        if (start > text.size())
            break;
    }
    return t;
}

}  // namespace sweepscope
