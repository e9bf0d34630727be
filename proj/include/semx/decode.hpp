#pragma once

// The two label-scoring rules under comparison:
//   standard   P(l | x)     = exp(z_l) / sum_{l'} exp(z_l')
//   semantic   P_sem(l | x) = sum_v P(v) w(v, l) / sum_{l'} sum_v P(v) w(v, l')
// where v ranges over the top-K candidate tokens (plus the label tokens).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "semx/core_types.hpp"
#include "semx/kernel.hpp"

namespace semx {

inline constexpr std::size_t kDefaultTopK = 50;
/// Below this the semantic denominator is treated as vanished.
inline constexpr double kSemanticUnderflow = 1e-300;

enum class CandidateSource { Dense, SparseProvided };

struct Candidate {
    TokenId token_id;
    double mass;
    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Retained support for the semantic sum: top-K tokens united with the label
/// tokens, sorted by token id. Masses are exp(z - z_max) over the retained set.
struct CandidateSet {
    std::vector<Candidate> pairs;
    std::size_t k_requested = 0;
    CandidateSource source = CandidateSource::Dense;
};

namespace detail {

/// Token ids of the k largest values, ordered by descending value with ties
/// going to the lower id.
inline std::vector<TokenId> top_k_order(const std::vector<double>& values, std::size_t k) {
    std::vector<TokenId> order(values.size());
    std::iota(order.begin(), order.end(), TokenId{0});
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](TokenId a, TokenId b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
    order.resize(k);
    return order;
}

inline const SparseEntry* find_entry(const SparseLogits& sparse, TokenId token) noexcept {
    for (const auto& e : sparse.entries) {
        if (e.token_id == token) return &e;
    }
    return nullptr;
}

inline double label_logit(const LogitRecord& record, const Label& label) {
    if (const auto* dense = std::get_if<DenseLogits>(&record.logits)) {
        if (label.token_id >= dense->values.size()) {
            throw Error(Errc::DimensionMismatch, "label '" + label.name + "' token " + std::to_string(label.token_id) +
                                                     " outside dense logits of length " +
                                                     std::to_string(dense->values.size()));
        }
        return dense->values[label.token_id];
    }
    const auto* entry = find_entry(std::get<SparseLogits>(record.logits), label.token_id);
    if (entry == nullptr) {
        throw Error(Errc::MissingLabelLogit, "record '" + record.example_id + "' has no score for label '" +
                                                 label.name + "' (token " + std::to_string(label.token_id) + ")");
    }
    return entry->score;
}

/// Sum in index order with Neumaier compensation.
inline double ordered_sum(const std::vector<double>& values) noexcept {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : values) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

} // namespace detail

/// Softmax restricted to the label tokens, with max subtraction.
inline LabelDistribution constrained_softmax(const LogitRecord& record, const LabelSet& labels) {
    std::vector<double> z(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) z[i] = detail::label_logit(record, labels[i]);
    const double z_max = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - z_max);
    const double total = detail::ordered_sum(p);
    for (double& x : p) x /= total;
    return {std::move(p), Method::Standard, record.example_id};
}

inline CandidateSet select_candidates(const LogitRecord& record, const LabelSet& labels, std::size_t k) {
    if (k < 1) throw Error(Errc::InvalidConfig, "K must be at least 1");

    std::vector<SparseEntry> retained;
    CandidateSource source{};
    if (const auto* dense = std::get_if<DenseLogits>(&record.logits)) {
        source = CandidateSource::Dense;
        for (TokenId t : detail::top_k_order(dense->values, k)) retained.push_back({t, dense->values[t]});
        for (const auto& label : labels) {
            retained.push_back({label.token_id, detail::label_logit(record, label)});
        }
    } else {
        source = CandidateSource::SparseProvided;
        const auto& sparse = std::get<SparseLogits>(record.logits);
        const std::size_t take = std::min(k, sparse.entries.size());
        retained.assign(sparse.entries.begin(), sparse.entries.begin() + static_cast<std::ptrdiff_t>(take));
        for (const auto& label : labels) {
            retained.push_back({label.token_id, detail::label_logit(record, label)});
        }
    }

    std::sort(retained.begin(), retained.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.token_id < b.token_id; });
    retained.erase(std::unique(retained.begin(), retained.end(),
                               [](const SparseEntry& a, const SparseEntry& b) { return a.token_id == b.token_id; }),
                   retained.end());

    double z_max = retained.front().score;
    for (const auto& e : retained) z_max = std::max(z_max, e.score);

    CandidateSet out;
    out.k_requested = k;
    out.source = source;
    out.pairs.reserve(retained.size());
    for (const auto& e : retained) out.pairs.push_back({e.token_id, std::exp(e.score - z_max)});
    return out;
}

/// Kernel-weighted aggregation of candidate mass. Falls back to the
/// constrained softmax (tagged SemanticFellBack) when no candidate carries
/// weight for any label.
inline LabelDistribution semantic_softmax(const CandidateSet& candidates, const SemanticKernel& kernel,
                                          const LabelSet& labels, const LogitRecord& record) {
    if (kernel.n_labels() != labels.size() || kernel.label_tokens() != labels.token_ids()) {
        throw Error(Errc::KernelLabelMismatch, "kernel was built for a different label set");
    }

    std::vector<double> numerators(labels.size(), 0.0);
    for (std::size_t l = 0; l < labels.size(); ++l) {
        const KernelRow& row = kernel.rows()[l];
        std::vector<double> terms;
        auto c = candidates.pairs.begin();
        auto r = row.begin();
        while (c != candidates.pairs.end() && r != row.end()) {
            if (c->token_id < r->token_id) {
                ++c;
            } else if (r->token_id < c->token_id) {
                ++r;
            } else {
                terms.push_back(c->mass * r->weight);
                ++c;
                ++r;
            }
        }
        numerators[l] = detail::ordered_sum(terms);
    }

    const double total = detail::ordered_sum(numerators);
    if (!(total >= kSemanticUnderflow)) {
        auto fallback = constrained_softmax(record, labels);
        fallback.method = Method::SemanticFellBack;
        return fallback;
    }
    for (double& x : numerators) x /= total;
    return {std::move(numerators), Method::Semantic, record.example_id};
}

/// Convenience: candidate selection followed by semantic_softmax.
inline LabelDistribution semantic_softmax(const LogitRecord& record, const SemanticKernel& kernel,
                                          const LabelSet& labels, std::size_t k) {
    return semantic_softmax(select_candidates(record, labels, k), kernel, labels, record);
}

/// Shrinks a record to its top-k_max tokens plus the label tokens, as a sparse
/// record ordered by descending score (ties to the lower id). For every
/// K <= k_max, select_candidates on the result equals select_candidates on the
/// original.
inline LogitRecord compact_record(const LogitRecord& record, const LabelSet& labels, std::size_t k_max) {
    const auto* dense = std::get_if<DenseLogits>(&record.logits);
    if (dense == nullptr) return record;

    SparseLogits sparse;
    sparse.kind = ScoreKind::Logit;
    std::vector<TokenId> order = detail::top_k_order(dense->values, k_max);
    for (TokenId t : order) sparse.entries.push_back({t, dense->values[t]});
    for (const auto& label : labels) {
        if (detail::find_entry(sparse, label.token_id) == nullptr) {
            sparse.entries.push_back({label.token_id, detail::label_logit(record, label)});
        }
    }
    std::stable_sort(sparse.entries.begin() + static_cast<std::ptrdiff_t>(order.size()), sparse.entries.end(),
                     [](const SparseEntry& a, const SparseEntry& b) {
                         return a.score > b.score || (a.score == b.score && a.token_id < b.token_id);
                     });
    return {record.example_id, std::move(sparse), record.truth};
}

} // namespace semx
