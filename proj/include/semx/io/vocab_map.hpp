#pragma once

// Token-string to token-id map used to translate endpoint responses.
// One entry per line: "<escaped token string>\t<token_id>". Escapes: \\ \t \n \r.

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>

#include "semx/core_types.hpp"
#include "semx/io/labels_io.hpp"

namespace semx {

using VocabMap = std::unordered_map<std::string, TokenId>;

namespace detail {

inline std::string escape_token(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string unescape_token(const std::string& s, std::size_t line) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out += s[i];
            continue;
        }
        if (++i == s.size()) throw Error(Errc::MalformedLine, "dangling escape", line);
        switch (s[i]) {
        case '\\': out += '\\'; break;
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        default: throw Error(Errc::MalformedLine, std::string("unknown escape \\") + s[i], line);
        }
    }
    return out;
}

} // namespace detail

inline VocabMap read_vocab_map(std::istream& in) {
    VocabMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw Error(Errc::MalformedLine, "expected '<token>\\t<id>'", line_no);
        TokenId id = 0;
        if (!detail::parse_u32(line.substr(tab + 1), id)) {
            throw Error(Errc::MalformedLine, "token id is not an integer", line_no);
        }
        auto token = detail::unescape_token(line.substr(0, tab), line_no);
        if (!map.emplace(std::move(token), id).second) {
            throw Error(Errc::MalformedLine, "token string listed twice", line_no);
        }
    }
    return map;
}

inline VocabMap read_vocab_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return read_vocab_map(in);
}

inline void write_vocab_entry(std::ostream& out, const std::string& token, TokenId id) {
    out << detail::escape_token(token) << '\t' << id << '\n';
}

} // namespace semx
