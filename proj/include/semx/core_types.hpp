#pragma once

// Shared value types for kernel construction, decoding, metrics and I/O.
// Everything here is validated on construction and immutable afterwards.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "semx/error.hpp"

namespace semx {

using TokenId = std::uint32_t;

/// Rows whose Euclidean norm falls below this are treated as zero vectors.
inline constexpr double kZeroNormThreshold = 1e-12;
/// Tolerance on soft-label normalization.
inline constexpr double kSoftLabelTolerance = 1e-6;

namespace detail {

inline double dot(std::span<const float> a, std::span<const float> b) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    }
    return acc;
}

inline double norm(std::span<const float> a) noexcept { return std::sqrt(dot(a, a)); }

} // namespace detail

// ---------------------------------------------------------------------------
// EmbeddingMatrix
// ---------------------------------------------------------------------------

/// Output embedding matrix, |V| rows by d columns, stored row-major as 32-bit
/// floats. Row norms are computed in double precision at construction.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(std::size_t vocab_size, std::size_t dim, std::vector<float> data)
        : vocab_size_(vocab_size), dim_(dim), data_(std::move(data)) {
        if (vocab_size_ < 2 || dim_ < 1) {
            throw Error(Errc::DimensionMismatch, "embedding matrix needs vocab_size >= 2 and dim >= 1, got " +
                                                     std::to_string(vocab_size_) + "x" + std::to_string(dim_));
        }
        if (data_.size() != vocab_size_ * dim_) {
            throw Error(Errc::DimensionMismatch, "expected " + std::to_string(vocab_size_ * dim_) +
                                                     " values, got " + std::to_string(data_.size()));
        }
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i])) {
                throw Error(Errc::NonFiniteValue, "non-finite embedding value in row " + std::to_string(i / dim_));
            }
        }
        row_norms_.resize(vocab_size_);
        for (std::size_t i = 0; i < vocab_size_; ++i) row_norms_[i] = detail::norm(row(i));
    }

    [[nodiscard]] std::size_t vocab_size() const noexcept { return vocab_size_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
    [[nodiscard]] std::span<const double> row_norms() const noexcept { return row_norms_; }

    [[nodiscard]] std::span<const float> row(std::size_t i) const noexcept {
        return std::span<const float>(data_).subspan(i * dim_, dim_);
    }
    [[nodiscard]] double row_norm(std::size_t i) const noexcept { return row_norms_[i]; }

    friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) noexcept {
        return a.vocab_size_ == b.vocab_size_ && a.dim_ == b.dim_ &&
               std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(), b.data_.end(),
                          [](float x, float y) { return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y); });
    }

private:
    std::size_t vocab_size_;
    std::size_t dim_;
    std::vector<float> data_;
    std::vector<double> row_norms_;
};

/// Cosine similarity of rows i and j, clamped to [-1, 1]. The expression is
/// symmetric in (i, j) bit-for-bit.
inline double cosine(const EmbeddingMatrix& E, std::size_t i, std::size_t j) {
    if (i >= E.vocab_size() || j >= E.vocab_size()) {
        throw Error(Errc::IndexOutOfRange, "token index outside vocabulary of size " + std::to_string(E.vocab_size()));
    }
    for (std::size_t t : {i, j}) {
        if (E.row_norm(t) < kZeroNormThreshold) {
            throw Error(Errc::ZeroNormRow, "row " + std::to_string(t) + " has zero norm");
        }
    }
    const double c = detail::dot(E.row(i), E.row(j)) / (E.row_norm(i) * E.row_norm(j));
    return std::clamp(c, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// LabelSet
// ---------------------------------------------------------------------------

struct Label {
    std::string name;
    TokenId token_id;

    friend bool operator==(const Label&, const Label&) = default;
};

/// Ordered verbalizer. Position in the list is the label index.
class LabelSet {
public:
    explicit LabelSet(std::vector<Label> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw Error(Errc::EmptyLabelSet, "label set has no labels");
        std::unordered_set<TokenId> tokens;
        std::unordered_set<std::string> names;
        for (const auto& l : labels_) {
            if (!tokens.insert(l.token_id).second) {
                throw Error(Errc::DuplicateTokenId, "token id " + std::to_string(l.token_id) + " used by two labels");
            }
            if (!names.insert(l.name).second) {
                throw Error(Errc::DuplicateName, "label name '" + l.name + "' appears twice");
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] const Label& operator[](std::size_t i) const noexcept { return labels_[i]; }
    [[nodiscard]] const std::vector<Label>& labels() const noexcept { return labels_; }
    [[nodiscard]] auto begin() const noexcept { return labels_.begin(); }
    [[nodiscard]] auto end() const noexcept { return labels_.end(); }

    [[nodiscard]] std::vector<TokenId> token_ids() const {
        std::vector<TokenId> out;
        out.reserve(labels_.size());
        for (const auto& l : labels_) out.push_back(l.token_id);
        return out;
    }

    /// Throws TokenOutOfRange unless every label token is a valid row of a
    /// vocabulary of the given size.
    void check_vocab(std::size_t vocab_size) const {
        for (const auto& l : labels_) {
            if (l.token_id >= vocab_size) {
                throw Error(Errc::TokenOutOfRange, "label '" + l.name + "' token " + std::to_string(l.token_id) +
                                                       " >= vocab size " + std::to_string(vocab_size));
            }
        }
    }

    friend bool operator==(const LabelSet&, const LabelSet&) = default;

private:
    std::vector<Label> labels_;
};

// ---------------------------------------------------------------------------
// LogitRecord
// ---------------------------------------------------------------------------

enum class ScoreKind { Logit, LogProb };

struct DenseLogits {
    std::vector<double> values;
    friend bool operator==(const DenseLogits&, const DenseLogits&) = default;
};

struct SparseEntry {
    TokenId token_id;
    double score;
    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Top-K (token, score) pairs, sorted by descending score.
struct SparseLogits {
    std::vector<SparseEntry> entries;
    ScoreKind kind = ScoreKind::Logit;
    friend bool operator==(const SparseLogits&, const SparseLogits&) = default;
};

struct HardLabel {
    std::size_t index;
    friend bool operator==(const HardLabel&, const HardLabel&) = default;
};

struct SoftLabel {
    std::vector<double> probs;
    friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

using Truth = std::variant<HardLabel, SoftLabel>;
using Logits = std::variant<DenseLogits, SparseLogits>;

struct LogitRecord {
    std::string example_id;
    Logits logits;
    std::optional<Truth> truth;

    [[nodiscard]] bool is_dense() const noexcept { return std::holds_alternative<DenseLogits>(logits); }
    friend bool operator==(const LogitRecord&, const LogitRecord&) = default;
};

namespace detail {

inline void validate_truth(const Truth& truth, std::size_t n_labels) {
    if (const auto* hard = std::get_if<HardLabel>(&truth)) {
        if (hard->index >= n_labels) {
            throw Error(Errc::TruthIndexOutOfRange,
                        "hard label " + std::to_string(hard->index) + " >= label count " + std::to_string(n_labels));
        }
        return;
    }
    const auto& soft = std::get<SoftLabel>(truth);
    if (soft.probs.size() != n_labels) {
        throw Error(Errc::BadSoftLabel, "soft label has " + std::to_string(soft.probs.size()) + " entries, expected " +
                                            std::to_string(n_labels));
    }
    double sum = 0.0;
    for (double p : soft.probs) {
        if (!std::isfinite(p) || p < 0.0) throw Error(Errc::BadSoftLabel, "soft label entry is negative or non-finite");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSoftLabelTolerance) {
        throw Error(Errc::BadSoftLabel, "soft label sums to " + std::to_string(sum));
    }
}

} // namespace detail

/// Returns the record unchanged iff it is well-formed for the given vocabulary
/// and label count; throws otherwise.
inline LogitRecord validate_record(LogitRecord record, std::size_t vocab_size, std::size_t n_labels) {
    if (const auto* dense = std::get_if<DenseLogits>(&record.logits)) {
        if (dense->values.size() != vocab_size) {
            throw Error(Errc::DimensionMismatch, "dense logits have length " + std::to_string(dense->values.size()) +
                                                     ", vocabulary has " + std::to_string(vocab_size));
        }
        for (std::size_t i = 0; i < dense->values.size(); ++i) {
            if (!std::isfinite(dense->values[i])) {
                throw Error(Errc::NonFiniteValue, "dense logit at token " + std::to_string(i) + " is not finite");
            }
        }
    } else {
        const auto& sparse = std::get<SparseLogits>(record.logits);
        std::unordered_set<TokenId> seen;
        seen.reserve(sparse.entries.size());
        for (std::size_t i = 0; i < sparse.entries.size(); ++i) {
            const auto& e = sparse.entries[i];
            if (e.token_id >= vocab_size) {
                throw Error(Errc::TokenOutOfRange, "sparse token " + std::to_string(e.token_id) + " outside vocabulary");
            }
            if (!std::isfinite(e.score)) {
                throw Error(Errc::NonFiniteValue, "sparse score for token " + std::to_string(e.token_id) + " is not finite");
            }
            if (!seen.insert(e.token_id).second) {
                throw Error(Errc::DuplicateTokenId, "token " + std::to_string(e.token_id) + " repeated in sparse record");
            }
            if (i > 0 && sparse.entries[i - 1].score < e.score) {
                throw Error(Errc::UnsortedSparse, "sparse pairs not sorted by descending score at position " +
                                                      std::to_string(i));
            }
        }
    }
    if (record.truth) detail::validate_truth(*record.truth, n_labels);
    return record;
}

// ---------------------------------------------------------------------------
// SemanticKernel
// ---------------------------------------------------------------------------

struct KernelEntry {
    TokenId token_id;
    double weight;
    friend bool operator==(const KernelEntry&, const KernelEntry&) = default;
};

/// Sorted by token id, weights strictly positive.
using KernelRow = std::vector<KernelEntry>;

/// Per-label sparse weight rows w(v, l) = max(0, cos(v, l) - tau) over the
/// whole vocabulary. Only strictly positive weights are stored.
class SemanticKernel {
public:
    static constexpr double kSelfWeightTolerance = 1e-7;

    SemanticKernel(double tau, std::size_t vocab_size, std::vector<TokenId> label_tokens, std::vector<KernelRow> rows)
        : tau_(tau), vocab_size_(vocab_size), label_tokens_(std::move(label_tokens)), rows_(std::move(rows)) {
        if (!(tau_ >= 0.0 && tau_ < 1.0)) throw Error(Errc::InvalidTau, "tau must lie in [0, 1)");
        if (rows_.size() != label_tokens_.size()) {
            throw Error(Errc::KernelLabelMismatch, "kernel has " + std::to_string(rows_.size()) + " rows for " +
                                                       std::to_string(label_tokens_.size()) + " labels");
        }
        const double self = label_self_weight();
        for (std::size_t l = 0; l < rows_.size(); ++l) {
            bool has_self = false;
            for (std::size_t i = 0; i < rows_[l].size(); ++i) {
                const auto& e = rows_[l][i];
                if (e.token_id >= vocab_size_) throw Error(Errc::TokenOutOfRange, "kernel token outside vocabulary");
                if (i > 0 && rows_[l][i - 1].token_id >= e.token_id) {
                    throw Error(Errc::DuplicateTokenId, "kernel row " + std::to_string(l) + " not strictly sorted");
                }
                if (!(e.weight > 0.0 && e.weight <= self + kSelfWeightTolerance)) {
                    throw Error(Errc::InvalidConfig, "kernel weight outside (0, 1 - tau] in row " + std::to_string(l));
                }
                if (e.token_id == label_tokens_[l]) {
                    has_self = std::abs(e.weight - self) <= kSelfWeightTolerance;
                }
            }
            if (!has_self) {
                throw Error(Errc::InvalidConfig, "kernel row " + std::to_string(l) + " lacks its self weight 1 - tau");
            }
        }
    }

    [[nodiscard]] double tau() const noexcept { return tau_; }
    [[nodiscard]] double label_self_weight() const noexcept { return 1.0 - tau_; }
    [[nodiscard]] std::size_t vocab_size() const noexcept { return vocab_size_; }
    [[nodiscard]] std::size_t n_labels() const noexcept { return rows_.size(); }
    [[nodiscard]] const std::vector<TokenId>& label_tokens() const noexcept { return label_tokens_; }
    [[nodiscard]] const std::vector<KernelRow>& rows() const noexcept { return rows_; }

    friend bool operator==(const SemanticKernel&, const SemanticKernel&) = default;

private:
    double tau_;
    std::size_t vocab_size_;
    std::vector<TokenId> label_tokens_;
    std::vector<KernelRow> rows_;
};

// ---------------------------------------------------------------------------
// Distributions, evaluation records, reports
// ---------------------------------------------------------------------------

enum class Method { Standard, Semantic, SemanticFellBack };

constexpr std::string_view method_name(Method m) noexcept {
    switch (m) {
    case Method::Standard: return "standard";
    case Method::Semantic: return "semantic";
    case Method::SemanticFellBack: return "semantic_fell_back";
    }
    return "unknown";
}

struct LabelDistribution {
    std::vector<double> probs;
    Method method = Method::Standard;
    std::string example_id;

    friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;
};

/// Index of the largest component; ties go to the lower index.
inline std::size_t argmax(std::span<const double> values) noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

/// Hard class index of a truth value (soft labels are argmax-converted).
inline std::size_t hard_index(const Truth& truth) noexcept {
    if (const auto* hard = std::get_if<HardLabel>(&truth)) return hard->index;
    return argmax(std::get<SoftLabel>(truth).probs);
}

struct EvalRecord {
    LabelDistribution distribution;
    Truth truth;

    EvalRecord(LabelDistribution dist, Truth t) : distribution(std::move(dist)), truth(std::move(t)) {
        detail::validate_truth(truth, distribution.probs.size());
    }
};

struct MetricsReport {
    double ece = 0.0;
    double brier = 0.0;
    /// Absent when no class has both positive and negative support.
    std::optional<double> auroc;
    double macro_f1 = 0.0;
    double mean_confidence = 0.0;
    std::size_t n_examples = 0;
    std::size_t n_bins = 0;
    std::size_t fallback_count = 0;
};

} // namespace semx
