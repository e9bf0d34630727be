#pragma once

// Collects sparse logprob dumps from an OpenAI-compatible completions
// endpoint. One request per prompt (max_tokens = 1, top logprobs = min(K,
// cap)); returned token strings are mapped to ids through a VocabMap and
// written as sparse "logprob" records in prompt order.
//
// Prompt file: JSON lines {"prompt": "...", "example_id": "...", "truth": ...};
// example_id defaults to "prompt-<line>", truth is passed through.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "semx/core_types.hpp"
#include "semx/io/dump_io.hpp"
#include "semx/io/vocab_map.hpp"

namespace semx {

struct EndpointConfig {
    /// e.g. "http://localhost:8000/v1"; "/completions" is appended.
    std::string base_url;
    std::string model;
    std::string api_key;
    std::chrono::milliseconds timeout{30000};
    std::size_t max_attempts = 5;
    std::chrono::milliseconds backoff_base{500};
    double backoff_factor = 2.0;
    std::size_t max_in_flight = 4;
    /// Server-side limit on top logprobs; 0 means no known limit.
    std::size_t logprobs_cap = 0;
};

struct FetchStats {
    std::size_t prompts = 0;
    std::size_t pairs_kept = 0;
    /// Token strings absent from the vocab map (pairs dropped).
    std::size_t map_misses = 0;
    /// Responses carrying fewer top logprobs than K.
    std::size_t capped_responses = 0;
    std::size_t retries = 0;

    [[nodiscard]] double miss_rate() const noexcept {
        const std::size_t total = pairs_kept + map_misses;
        return total == 0 ? 0.0 : static_cast<double>(map_misses) / static_cast<double>(total);
    }
};

inline constexpr double kMaxTokenMissRate = 0.5;

struct Prompt {
    std::string example_id;
    std::string text;
    std::optional<Truth> truth;
};

namespace detail {

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string path;   // without trailing slash
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::InvalidConfig, "base URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

/// Token -> logprob pairs for the first generated position. Accepts both the
/// completions shape (logprobs.top_logprobs[0] is an object) and the chat
/// shape (logprobs.content[0].top_logprobs is an array of {token, logprob}).
inline std::vector<std::pair<std::string, double>> parse_top_logprobs(const nlohmann::json& body) {
    std::vector<std::pair<std::string, double>> out;
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
        throw Error(Errc::RemoteError, "response has no choices");
    }
    const auto& choice = body["choices"][0];
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
        throw Error(Errc::RemoteError, "response has no logprobs");
    }
    const auto& lp = choice["logprobs"];
    if (lp.contains("top_logprobs") && lp["top_logprobs"].is_array() && !lp["top_logprobs"].empty() &&
        lp["top_logprobs"][0].is_object()) {
        for (const auto& [token, value] : lp["top_logprobs"][0].items()) {
            if (value.is_number()) out.emplace_back(token, value.get<double>());
        }
        return out;
    }
    if (lp.contains("content") && lp["content"].is_array() && !lp["content"].empty()) {
        const auto& first = lp["content"][0];
        if (first.contains("top_logprobs") && first["top_logprobs"].is_array()) {
            for (const auto& item : first["top_logprobs"]) {
                if (item.contains("token") && item.contains("logprob") && item["logprob"].is_number()) {
                    out.emplace_back(item["token"].get<std::string>(), item["logprob"].get<double>());
                }
            }
            return out;
        }
    }
    throw Error(Errc::RemoteError, "response logprobs have an unrecognized shape");
}

inline bool looks_like_context_overflow(const std::string& body) {
    for (const char* needle : {"context length", "context_length", "too long", "maximum context"}) {
        if (body.find(needle) != std::string::npos) return true;
    }
    return false;
}

struct FetchOutcome {
    LogitRecord record;
    std::size_t kept = 0;
    std::size_t misses = 0;
    bool capped = false;
    std::size_t retries = 0;
};

class CompletionClient {
public:
    explicit CompletionClient(const EndpointConfig& config) : config_(config), url_(split_url(config.base_url)) {}

    nlohmann::json complete(const std::string& prompt, std::size_t top_logprobs, std::size_t& retries) {
        httplib::Client client(url_.origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

        nlohmann::json request = {{"model", config_.model}, {"prompt", prompt},     {"max_tokens", 1},
                                  {"temperature", 0},        {"logprobs", top_logprobs}};
        const std::string body = request.dump();
        const std::string path = url_.path + "/completions";

        auto delay = std::chrono::duration<double, std::milli>(config_.backoff_base);
        std::string last_problem;
        for (std::size_t attempt = 1; attempt <= std::max<std::size_t>(config_.max_attempts, 1); ++attempt) {
            if (attempt > 1) {
                ++retries;
                std::this_thread::sleep_for(delay);
                delay *= config_.backoff_factor;
            }
            auto res = client.Post(path, body, "application/json");
            if (!res) {
                last_problem = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            const int status = res->status;
            if (status == 200) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::parse_error&) {
                    throw Error(Errc::RemoteError, "endpoint returned invalid JSON");
                }
            }
            if (status == 401 || status == 403) {
                throw Error(Errc::AuthFailure, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
            }
            if (status == 429 || status >= 500) {
                last_problem = "HTTP " + std::to_string(status);
                continue;
            }
            if ((status == 400 || status == 413) && looks_like_context_overflow(res->body)) {
                throw Error(Errc::PromptTooLong, res->body);
            }
            throw Error(Errc::RemoteError, "HTTP " + std::to_string(status) + ": " + res->body);
        }
        throw Error(Errc::RemoteError, "giving up after " + std::to_string(config_.max_attempts) +
                                           " attempts (" + last_problem + ")");
    }

private:
    const EndpointConfig& config_;
    SplitUrl url_;
};

inline FetchOutcome fetch_one(CompletionClient& client, const Prompt& prompt, const VocabMap& vocab, std::size_t k,
                              std::size_t request_k) {
    FetchOutcome out;
    const auto body = client.complete(prompt.text, request_k, out.retries);
    const auto pairs = parse_top_logprobs(body);
    out.capped = pairs.size() < k;

    SparseLogits sparse;
    sparse.kind = ScoreKind::LogProb;
    for (const auto& [token, logprob] : pairs) {
        const auto it = vocab.find(token);
        if (it == vocab.end()) {
            ++out.misses;
            continue;
        }
        auto existing = std::find_if(sparse.entries.begin(), sparse.entries.end(),
                                     [&](const SparseEntry& e) { return e.token_id == it->second; });
        if (existing == sparse.entries.end()) {
            sparse.entries.push_back({it->second, logprob});
        } else {
            existing->score = std::max(existing->score, logprob);
        }
    }
    std::sort(sparse.entries.begin(), sparse.entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
        return a.score > b.score || (a.score == b.score && a.token_id < b.token_id);
    });
    out.kept = sparse.entries.size();
    out.record = {prompt.example_id, std::move(sparse), prompt.truth};
    return out;
}

} // namespace detail

inline std::vector<Prompt> read_prompts(std::istream& in) {
    std::vector<Prompt> prompts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::MalformedLine, std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!j.is_object() || !j.contains("prompt") || !j["prompt"].is_string()) {
            throw Error(Errc::MalformedLine, "prompt line needs a string 'prompt'", line_no);
        }
        Prompt p;
        p.text = j["prompt"].get<std::string>();
        p.example_id = j.contains("example_id") && j["example_id"].is_string() ? j["example_id"].get<std::string>()
                                                                               : "prompt-" + std::to_string(line_no);
        if (j.contains("truth") && !j["truth"].is_null()) {
            if (j["truth"].is_number_unsigned()) {
                p.truth = HardLabel{j["truth"].get<std::size_t>()};
            } else {
                p.truth = SoftLabel{detail::parse_number_array(j["truth"], "truth", line_no)};
            }
        }
        prompts.push_back(std::move(p));
    }
    return prompts;
}

/// Fetches every prompt with at most `max_in_flight` concurrent requests and
/// writes records to `out` in prompt order. Aborts with TokenMapMiss once more
/// than half of all returned token strings have failed to map.
inline FetchStats fetch_logprobs(const EndpointConfig& config, const std::vector<Prompt>& prompts,
                                 const VocabMap& vocab, std::size_t k, std::ostream& out) {
    if (k < 1) throw Error(Errc::InvalidConfig, "K must be at least 1");
    (void)detail::split_url(config.base_url); // reject a bad URL before any worker starts
    const std::size_t request_k = config.logprobs_cap == 0 ? k : std::min(k, config.logprobs_cap);

    std::vector<std::optional<detail::FetchOutcome>> results(prompts.size());
    std::vector<std::exception_ptr> failures(prompts.size());
    std::mutex mutex;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};

    auto worker = [&] {
        detail::CompletionClient client(config);
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= prompts.size() || stop.load()) return;
            std::optional<detail::FetchOutcome> outcome;
            std::exception_ptr failure;
            try {
                outcome = detail::fetch_one(client, prompts[i], vocab, k, request_k);
            } catch (...) {
                failure = std::current_exception();
            }
            {
                std::lock_guard lock(mutex);
                results[i] = std::move(outcome);
                failures[i] = failure;
            }
            ready.notify_all();
        }
    };

    FetchStats stats;
    std::vector<std::jthread> pool;
    const std::size_t workers = std::clamp<std::size_t>(config.max_in_flight, 1, std::max<std::size_t>(prompts.size(), 1));
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);

    try {
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            detail::FetchOutcome outcome;
            {
                std::unique_lock lock(mutex);
                ready.wait(lock, [&] { return results[i].has_value() || failures[i] != nullptr; });
                if (failures[i]) std::rethrow_exception(failures[i]);
                outcome = std::move(*results[i]);
                results[i].reset();
            }
            stats.prompts += 1;
            stats.pairs_kept += outcome.kept;
            stats.map_misses += outcome.misses;
            stats.capped_responses += outcome.capped ? 1 : 0;
            stats.retries += outcome.retries;
            if (stats.miss_rate() > kMaxTokenMissRate) {
                throw Error(Errc::TokenMapMiss, std::to_string(stats.map_misses) + " of " +
                                                    std::to_string(stats.map_misses + stats.pairs_kept) +
                                                    " returned tokens are missing from the vocab map");
            }
            write_record(outcome.record, out);
        }
    } catch (...) {
        stop.store(true);
        throw;
    }
    if (!out) throw Error(Errc::IoError, "failed writing dump");
    return stats;
}

/// File variant: the dump is written to a temporary sibling and renamed on
/// success, so an aborted run leaves no partial output.
inline FetchStats fetch_logprobs(const EndpointConfig& config, const std::filesystem::path& prompts_path,
                                 const std::filesystem::path& vocab_path, std::size_t k,
                                 const std::filesystem::path& out_path) {
    std::ifstream prompts_in(prompts_path);
    if (!prompts_in) throw Error(Errc::IoError, "cannot open " + prompts_path.string());
    const auto prompts = read_prompts(prompts_in);
    const auto vocab = read_vocab_map(vocab_path);

    auto tmp = out_path;
    tmp += ".partial";
    FetchStats stats;
    try {
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw Error(Errc::IoError, "cannot open " + tmp.string() + " for writing");
            stats = fetch_logprobs(config, prompts, vocab, k, out);
        }
        std::filesystem::rename(tmp, out_path);
    } catch (...) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw;
    }
    return stats;
}

} // namespace semx
