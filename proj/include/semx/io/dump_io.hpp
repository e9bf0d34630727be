#pragma once

// Line-delimited logit dumps. One JSON object per line:
//
//   {"example_id": "a1", "dense": [z_0, ..., z_{|V|-1}], "truth": 1}
//   {"example_id": "a2", "sparse": [[17, -0.1], [4, -2.3]], "score_kind": "logprob",
//    "truth": [0.3, 0.7]}
//
// Exactly one of "dense" / "sparse". "score_kind" ("logit" | "logprob") is
// required with "sparse". "truth" is optional: an integer label index or an
// array of n probabilities.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semx/core_types.hpp"

namespace semx {

namespace detail {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] inline void malformed(const std::string& what, std::size_t line) {
    throw Error(Errc::MalformedLine, what, line);
}

inline std::vector<double> parse_number_array(const nlohmann::json& j, const char* field, std::size_t line) {
    if (!j.is_array()) malformed(std::string("'") + field + "' must be an array", line);
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) malformed(std::string("'") + field + "' must hold numbers", line);
        out.push_back(x.get<double>());
    }
    return out;
}

inline LogitRecord parse_record(const std::string& text, std::size_t line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        malformed(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!j.is_object()) malformed("record must be a JSON object", line);
    for (const auto& [key, value] : j.items()) {
        if (key != "example_id" && key != "dense" && key != "sparse" && key != "score_kind" && key != "truth") {
            malformed("unknown field '" + key + "'", line);
        }
    }

    LogitRecord record;
    if (!j.contains("example_id") || !j["example_id"].is_string()) malformed("missing string 'example_id'", line);
    record.example_id = j["example_id"].get<std::string>();

    const bool has_dense = j.contains("dense");
    const bool has_sparse = j.contains("sparse");
    if (has_dense == has_sparse) malformed("exactly one of 'dense' or 'sparse' is required", line);
    if (has_dense) {
        if (j.contains("score_kind")) malformed("'score_kind' only applies to sparse records", line);
        record.logits = DenseLogits{parse_number_array(j["dense"], "dense", line)};
    } else {
        SparseLogits sparse;
        if (!j.contains("score_kind") || !j["score_kind"].is_string()) malformed("sparse record needs 'score_kind'", line);
        const auto kind = j["score_kind"].get<std::string>();
        if (kind == "logit") {
            sparse.kind = ScoreKind::Logit;
        } else if (kind == "logprob") {
            sparse.kind = ScoreKind::LogProb;
        } else {
            malformed("score_kind must be 'logit' or 'logprob'", line);
        }
        const auto& pairs = j["sparse"];
        if (!pairs.is_array()) malformed("'sparse' must be an array of [token_id, score] pairs", line);
        sparse.entries.reserve(pairs.size());
        for (const auto& p : pairs) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number()) {
                malformed("'sparse' must be an array of [token_id, score] pairs", line);
            }
            const auto id = p[0].get<std::uint64_t>();
            if (id > UINT32_MAX) malformed("token id too large", line);
            sparse.entries.push_back({static_cast<TokenId>(id), p[1].get<double>()});
        }
        record.logits = std::move(sparse);
    }

    if (j.contains("truth") && !j["truth"].is_null()) {
        const auto& t = j["truth"];
        if (t.is_number_unsigned()) {
            record.truth = HardLabel{t.get<std::size_t>()};
        } else if (t.is_array()) {
            record.truth = SoftLabel{parse_number_array(t, "truth", line)};
        } else {
            malformed("'truth' must be a label index or an array of probabilities", line);
        }
    }
    return record;
}

} // namespace detail

/// Serializes one record as a single JSON line (no trailing newline).
inline std::string format_record(const LogitRecord& record) {
    detail::ordered_json j;
    j["example_id"] = record.example_id;
    if (const auto* dense = std::get_if<DenseLogits>(&record.logits)) {
        j["dense"] = dense->values;
    } else {
        const auto& sparse = std::get<SparseLogits>(record.logits);
        auto pairs = detail::ordered_json::array();
        for (const auto& e : sparse.entries) pairs.push_back({e.token_id, e.score});
        j["sparse"] = std::move(pairs);
        j["score_kind"] = sparse.kind == ScoreKind::Logit ? "logit" : "logprob";
    }
    if (record.truth) {
        if (const auto* hard = std::get_if<HardLabel>(&*record.truth)) {
            j["truth"] = hard->index;
        } else {
            j["truth"] = std::get<SoftLabel>(*record.truth).probs;
        }
    }
    return j.dump();
}

inline void write_record(const LogitRecord& record, std::ostream& out) { out << format_record(record) << '\n'; }

/// Streaming reader; every record is validated against the vocabulary and
/// label count before it is handed out. Errors carry the 1-based line number.
class DumpReader {
public:
    DumpReader(std::istream& in, std::size_t vocab_size, std::size_t n_labels)
        : in_(in), vocab_size_(vocab_size), n_labels_(n_labels) {}

    std::optional<LogitRecord> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            auto record = detail::parse_record(line, line_no_);
            try {
                return validate_record(std::move(record), vocab_size_, n_labels_);
            } catch (const Error& e) {
                throw Error(e.code(), e.message(), line_no_);
            }
        }
        if (in_.bad()) throw Error(Errc::IoError, "read failure after line " + std::to_string(line_no_));
        return std::nullopt;
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::size_t vocab_size_;
    std::size_t n_labels_;
    std::size_t line_no_ = 0;
};

inline std::vector<LogitRecord> read_dump(std::istream& in, std::size_t vocab_size, std::size_t n_labels) {
    DumpReader reader(in, vocab_size, n_labels);
    std::vector<LogitRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    return out;
}

inline std::vector<LogitRecord> read_dump(const std::filesystem::path& path, std::size_t vocab_size,
                                          std::size_t n_labels) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return read_dump(in, vocab_size, n_labels);
}

inline void write_dump(const std::vector<LogitRecord>& records, std::ostream& out) {
    for (const auto& r : records) write_record(r, out);
    if (!out) throw Error(Errc::IoError, "failed writing dump");
}

inline void write_dump(const std::vector<LogitRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    write_dump(records, out);
}

} // namespace semx
