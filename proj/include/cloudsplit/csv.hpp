#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "cloudsplit/anonymize.hpp"
#include "cloudsplit/config.hpp"
#include "cloudsplit/error.hpp"

namespace cloudsplit::csv {

// Header line plus rows; no quoting. Cells that parse fully as signed
// 64-bit integers become integers, everything else stays text.
inline anonymize::Table parse(std::string_view text) {
    anonymize::Table t;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = config::trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty()) continue;
        auto cells = config::split(line, ',');
        if (t.columns.empty()) {
            t.columns = std::move(cells);
            continue;
        }
        if (cells.size() != t.columns.size())
            fail(ErrorCode::MalformedData, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(t.columns.size()) + " cells");
        std::vector<anonymize::Cell> row;
        for (auto& c : cells) {
            std::int64_t v = 0;
            const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (!c.empty() && ec == std::errc() && ptr == c.data() + c.size()) row.emplace_back(v);
            else row.emplace_back(std::move(c));
        }
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty()) fail(ErrorCode::EmptyInput, "table has no header");
    return t;
}

inline std::string render(const anonymize::Table& t) {
    auto cell = [](const anonymize::Cell& c) {
        if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
        return std::get<std::string>(c);
    };
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell(row[i]);
        out += "\n";
    }
    return out;
}

}  // namespace cloudsplit::csv
