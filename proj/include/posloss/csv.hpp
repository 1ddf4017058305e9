// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/core.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace posloss::csv
{
/// Shortest round-trip form is not needed; 17 significant digits always round-trips a double.
inline std::string format(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format(const std::optional<double>& v)
{
    return v ? format(*v) : std::string{};
}

inline std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_row(std::string_view line)
{
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;)
    {
        const auto comma = line.find(',', start);
        cells.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return cells;
}

/// Parses a numeric cell; empty cell means absent.
inline std::optional<double> parse_optional(const std::string& cell, std::size_t row, std::string_view column)
{
    if (cell.empty())
        return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v))
        throw ParseError("invalid number '" + cell + "' in column " + std::string(column), row);
    return v;
}

inline double parse_required(const std::string& cell, std::size_t row, std::string_view column)
{
    auto v = parse_optional(cell, row, column);
    if (!v)
        throw ParseError("missing mandatory value in column " + std::string(column), row);
    return *v;
}

/// Reads non-empty lines, skipping `#` comment lines.
inline std::vector<std::string> read_lines(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
    {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        lines.emplace_back(t);
    }
    return lines;
}

inline void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path);
    out << content;
    if (!out)
        throw IoError("write failed for " + path);
}

}  // namespace posloss::csv
