#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <filesystem>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ergodic/error.hpp"

namespace ergodic::io {

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double value)
{
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc())
        throw std::runtime_error("format_double: conversion failed");
    return std::string(buffer, end);
}

inline double parse_double(std::string_view text)
{
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size())
        throw DomainError("parse_double: not a number: '" + std::string(text) + "'");
    return value;
}

inline long long parse_integer(std::string_view text)
{
    long long value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size())
        throw DomainError("parse_integer: not an integer: '" + std::string(text) + "'");
    return value;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',')
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline std::string_view chomp(std::string_view line)
{
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.remove_suffix(1);
    return line;
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

} // namespace ergodic::io
