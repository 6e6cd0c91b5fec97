#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dcplus/errors.hpp"

namespace dcplus::tools {

using Cell = std::variant<std::string, int, double>;

/// Tabular command output emitted as CSV or JSON. Numeric cells use 12
/// significant digits and no locale, so files are byte-identical across
/// runs for identical inputs.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::vector<Cell>& add_row() {
        rows.emplace_back();
        return rows.back();
    }

    /// Writes <stem>.csv or <stem>.json depending on format; returns the
    /// path written.
    std::string write(const std::string& dir, const std::string& stem,
                      const std::string& format) const;
};

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string Table::write(const std::string& dir, const std::string& stem,
                                const std::string& format) const {
    const bool json = format == "json";
    const std::string path = dir + "/" + stem + (json ? ".json" : ".csv");
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    if (json) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& row : rows) {
            nlohmann::ordered_json obj;
            for (size_t c = 0; c < header.size() && c < row.size(); ++c) {
                const Cell& cell = row[c];
                if (std::holds_alternative<std::string>(cell))
                    obj[header[c]] = std::get<std::string>(cell);
                else if (std::holds_alternative<int>(cell))
                    obj[header[c]] = std::get<int>(cell);
                else {
                    const double v = std::get<double>(cell);
                    if (std::isnan(v))
                        obj[header[c]] = nullptr;
                    else
                        obj[header[c]] = v;
                }
            }
            arr.push_back(obj);
        }
        out << arr.dump(1) << '\n';
    } else {
        for (size_t c = 0; c < header.size(); ++c) {
            if (c) out << ',';
            out << header[c];
        }
        out << '\n';
        for (const auto& row : rows) {
            for (size_t c = 0; c < row.size(); ++c) {
                if (c) out << ',';
                const Cell& cell = row[c];
                if (std::holds_alternative<std::string>(cell))
                    out << std::get<std::string>(cell);
                else if (std::holds_alternative<int>(cell))
                    out << std::get<int>(cell);
                else if (!std::isnan(std::get<double>(cell)))
                    out << format_number(std::get<double>(cell));
            }
            out << '\n';
        }
    }
    return path;
}

}  // namespace dcplus::tools
