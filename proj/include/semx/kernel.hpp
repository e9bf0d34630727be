#pragma once

// Semantic kernel: per-label thresholded-cosine weights over the vocabulary,
//   w(v, l) = max(0, cos(E_v, E_l) - tau).

#include <cstddef>
#include <string>
#include <vector>

#include "semx/core_types.hpp"
#include "semx/detail/parallel.hpp"

namespace semx {

inline constexpr double kDefaultTau = 0.80;

inline void check_tau(double tau) {
    if (!(tau >= 0.0 && tau < 1.0)) {
        throw Error(Errc::InvalidTau, "tau must lie in [0, 1), got " + std::to_string(tau));
    }
}

/// Thresholded cosine between token v and label token l.
inline double semantic_weight(const EmbeddingMatrix& E, std::size_t v, std::size_t l, double tau) {
    check_tau(tau);
    const double w = cosine(E, v, l) - tau;
    return w > 0.0 ? w : 0.0;
}

/// Materializes one sparse row per label over the full vocabulary. Zero-norm
/// vocabulary rows are similar to nothing and are skipped; a zero-norm label
/// row is an error.
inline SemanticKernel build_kernel(const EmbeddingMatrix& E, const LabelSet& labels, double tau,
                                   std::size_t threads = 1) {
    check_tau(tau);
    labels.check_vocab(E.vocab_size());
    for (const auto& label : labels) {
        if (E.row_norm(label.token_id) < kZeroNormThreshold) {
            throw Error(Errc::ZeroNormRow,
                        "label '" + label.name + "' token " + std::to_string(label.token_id) + " has a zero-norm row");
        }
    }

    std::vector<KernelRow> rows(labels.size());
    detail::parallel_for(labels.size(), threads, [&](std::size_t li) {
        const std::size_t l = labels[li].token_id;
        KernelRow& row = rows[li];
        for (std::size_t v = 0; v < E.vocab_size(); ++v) {
            if (E.row_norm(v) < kZeroNormThreshold) continue;
            const double w = semantic_weight(E, v, l, tau);
            if (w > 0.0) row.push_back({static_cast<TokenId>(v), w});
        }
    });
    return SemanticKernel(tau, E.vocab_size(), labels.token_ids(), std::move(rows));
}

inline const KernelRow& kernel_row(const SemanticKernel& kernel, std::size_t label_index) {
    if (label_index >= kernel.n_labels()) {
        throw Error(Errc::IndexOutOfRange, "label index " + std::to_string(label_index) + " >= " +
                                               std::to_string(kernel.n_labels()));
    }
    return kernel.rows()[label_index];
}

} // namespace semx
