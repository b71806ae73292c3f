#include "amip/dataset.hpp"
#include "amip/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <unordered_map>

namespace amip {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool is_missing_marker(std::string_view s) {
    return s.empty() || s == "NA" || s == "N/A" || s == "NULL" || s == ".";
}

enum class CellStatus { Ok, Missing, Invalid };

CellStatus parse_number(std::string_view raw, double& out) {
    auto s = trim(raw);
    if (is_missing_marker(s)) return CellStatus::Missing;
    if (s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (ec != std::errc() || ptr != end) return CellStatus::Invalid;
    if (!std::isfinite(out)) return CellStatus::Missing;
    return CellStatus::Ok;
}

}  // namespace

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;

    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get(c);
            break;
        } else if (c == '\n') {
            break;
        } else {
            field.push_back(c);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

LoadResult parse_csv(std::istream& in, const CsvSchema& schema) {
    std::vector<std::string> header;
    if (!read_csv_record(in, header)) throw SchemaError("CSV input is empty; a header row is required");
    if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);
    for (auto& h : header) h = std::string(trim(h));

    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!position.emplace(header[i], i).second)
            throw SchemaError("duplicate column '" + header[i] + "' in CSV header");
    }

    struct Wanted {
        std::string name;
        std::size_t pos;
        bool categorical;
    };
    std::vector<Wanted> wanted;
    auto add = [&](const std::string& name, bool categorical) {
        auto it = position.find(name);
        if (it == position.end()) throw SchemaError("column '" + name + "' not found in CSV header");
        for (const auto& w : wanted) {
            if (w.name == name) {
                if (w.categorical != categorical)
                    throw SchemaError("column '" + name + "' declared both numeric and categorical");
                return;
            }
        }
        wanted.push_back({name, it->second, categorical});
    };
    if (schema.numeric.empty() && schema.categorical.empty()) {
        for (const auto& h : header) add(h, false);
    } else {
        for (const auto& n : schema.numeric) add(n, false);
        for (const auto& n : schema.categorical) add(n, true);
    }

    std::vector<std::vector<double>> numeric(wanted.size());
    std::vector<std::vector<std::string>> labels(wanted.size());
    std::vector<std::size_t> row_ids;
    LoadResult result;

    std::vector<std::string> fields;
    std::vector<double> num_row(wanted.size());
    std::vector<std::string> lab_row(wanted.size());
    std::size_t row = 0;
    while (read_csv_record(in, fields)) {
        ++row;
        if (fields.size() == 1 && trim(fields[0]).empty() && header.size() > 1) {
            --row;  // blank line
            continue;
        }
        if (fields.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                 " fields, header has " + std::to_string(header.size()),
                             row, "");
        }
        ++result.rows_read;
        bool keep = true;
        for (std::size_t j = 0; j < wanted.size() && keep; ++j) {
            const auto& w = wanted[j];
            const std::string& cell = fields[w.pos];
            if (w.categorical) {
                auto s = trim(cell);
                if (is_missing_marker(s)) {
                    if (schema.missing == MissingPolicy::Strict)
                        throw ParseError("missing value at row " + std::to_string(row) + ", column '" +
                                             w.name + "'",
                                         row, w.name);
                    keep = false;
                } else {
                    lab_row[j] = std::string(s);
                }
                continue;
            }
            switch (parse_number(cell, num_row[j])) {
                case CellStatus::Ok:
                    break;
                case CellStatus::Missing:
                    if (schema.missing == MissingPolicy::Strict)
                        throw ParseError("missing or non-finite value at row " + std::to_string(row) +
                                             ", column '" + w.name + "'",
                                         row, w.name);
                    keep = false;
                    break;
                case CellStatus::Invalid:
                    if (schema.missing == MissingPolicy::Strict)
                        throw ParseError("cannot parse '" + cell + "' as a number at row " +
                                             std::to_string(row) + ", column '" + w.name + "'",
                                         row, w.name);
                    keep = false;
                    break;
            }
        }
        if (!keep) {
            ++result.rows_dropped;
            continue;
        }
        for (std::size_t j = 0; j < wanted.size(); ++j) {
            if (wanted[j].categorical)
                labels[j].push_back(lab_row[j]);
            else
                numeric[j].push_back(num_row[j]);
        }
        row_ids.push_back(row);
    }

    if (row_ids.empty()) throw SchemaError("no usable data rows in CSV input");

    std::vector<std::string> names;
    std::vector<Column> columns;
    for (std::size_t j = 0; j < wanted.size(); ++j) {
        names.push_back(wanted[j].name);
        Column col;
        if (wanted[j].categorical) {
            std::map<std::string, double> codes;
            for (const auto& l : labels[j]) codes.emplace(l, 0.0);
            double next = 0.0;
            for (auto& [label, code] : codes) {
                code = next++;
                col.levels.push_back(label);
            }
            col.values.reserve(labels[j].size());
            for (const auto& l : labels[j]) col.values.push_back(codes.at(l));
        } else {
            col.values = std::move(numeric[j]);
        }
        columns.push_back(std::move(col));
    }
    result.data = Dataset(std::move(names), std::move(columns), std::move(row_ids));
    return result;
}

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_csv(in, schema);
}

}  // namespace amip
