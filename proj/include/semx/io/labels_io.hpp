#pragma once

// Label manifest: one label per line, "<name>\t<token_id>". Line order is the
// label index. Blank lines are ignored. A label must map to exactly one token.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semx/core_types.hpp"

namespace semx {

namespace detail {

inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_u32(std::string_view s, TokenId& out) noexcept {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace detail

inline LabelSet read_labels(std::istream& in) {
    std::vector<Label> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw Error(Errc::MalformedLine, "expected '<name>\\t<token_id>'", line_no);
        }
        const std::string_view field = detail::trim(std::string_view(line).substr(tab + 1));
        TokenId token = 0;
        if (!detail::parse_u32(field, token)) {
            if (field.find_first_of(" ,\t") != std::string_view::npos) {
                throw Error(Errc::MultiTokenLabel, "label '" + line.substr(0, tab) + "' lists more than one token",
                            line_no);
            }
            throw Error(Errc::MalformedLine, "token id '" + std::string(field) + "' is not an integer", line_no);
        }
        labels.push_back({line.substr(0, tab), token});
    }
    if (labels.empty()) throw Error(Errc::EmptyLabelSet, "label manifest has no labels");
    return LabelSet(std::move(labels));
}

inline void write_labels(const LabelSet& labels, std::ostream& out) {
    for (const auto& l : labels) {
        if (l.name.empty() || l.name.find_first_of("\t\n\r") != std::string::npos) {
            throw Error(Errc::MalformedLine, "label name '" + l.name + "' cannot be written to a manifest");
        }
        out << l.name << '\t' << l.token_id << '\n';
    }
    if (!out) throw Error(Errc::IoError, "failed writing label manifest");
}

inline LabelSet read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return read_labels(in);
}

inline void write_labels(const LabelSet& labels, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    write_labels(labels, out);
}

} // namespace semx
