#pragma once

// Batch evaluation: score a dump under one or both methods and compute the
// metric suite, either at a single (K, tau) or over a K x tau grid.

#include <algorithm>
#include <cstddef>
#include <istream>
#include <optional>
#include <vector>

#include "semx/core_types.hpp"
#include "semx/decode.hpp"
#include "semx/detail/parallel.hpp"
#include "semx/io/dump_io.hpp"
#include "semx/kernel.hpp"
#include "semx/metrics.hpp"

namespace semx {

enum class MethodSelection { Standard, Semantic, Both };

struct EvalOptions {
    std::size_t k = kDefaultTopK;
    double tau = kDefaultTau;
    std::size_t n_bins = kDefaultBins;
    MethodSelection method = MethodSelection::Both;
    std::size_t threads = 1;
};

/// Results for one scoring rule. `method` is Standard or Semantic; individual
/// records may still carry SemanticFellBack.
struct MethodResult {
    Method method = Method::Standard;
    MetricsReport report;
    ReliabilityBins reliability;
    std::vector<HistogramBin> histogram;
    std::vector<EvalRecord> records;
};

struct EvalResult {
    std::size_t k = 0;
    double tau = 0.0;
    std::vector<MethodResult> methods;
};

namespace detail {

inline bool wants(MethodSelection sel, Method m) noexcept {
    if (sel == MethodSelection::Both) return true;
    return (sel == MethodSelection::Standard) == (m == Method::Standard);
}

inline const Truth& require_truth(const LogitRecord& r) {
    if (!r.truth) throw Error(Errc::MissingTruth, "record '" + r.example_id + "' has no truth");
    return *r.truth;
}

/// Scores records in parallel; output order follows input order.
inline void score_into(std::span<const LogitRecord> batch, const LabelSet& labels, const SemanticKernel* kernel,
                       std::size_t k, MethodSelection sel, std::size_t threads, std::vector<EvalRecord>* standard,
                       std::vector<EvalRecord>* semantic) {
    std::vector<std::optional<EvalRecord>> std_out(batch.size());
    std::vector<std::optional<EvalRecord>> sem_out(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        const auto& r = batch[i];
        const Truth& truth = require_truth(r);
        if (wants(sel, Method::Standard)) std_out[i].emplace(constrained_softmax(r, labels), truth);
        if (wants(sel, Method::Semantic)) sem_out[i].emplace(semantic_softmax(r, *kernel, labels, k), truth);
    });
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (std_out[i]) standard->push_back(std::move(*std_out[i]));
        if (sem_out[i]) semantic->push_back(std::move(*sem_out[i]));
    }
}

inline MethodResult summarize(Method m, std::vector<EvalRecord> records, std::size_t n_bins) {
    MethodResult out;
    out.method = m;
    out.report = evaluate(records, n_bins);
    out.reliability = reliability_bins(records, n_bins);
    out.histogram = confidence_histogram(records, n_bins);
    out.records = std::move(records);
    return out;
}

inline EvalResult finish(const EvalOptions& opts, std::vector<EvalRecord> standard, std::vector<EvalRecord> semantic) {
    EvalResult result;
    result.k = opts.k;
    result.tau = opts.tau;
    if (wants(opts.method, Method::Standard)) {
        result.methods.push_back(summarize(Method::Standard, std::move(standard), opts.n_bins));
    }
    if (wants(opts.method, Method::Semantic)) {
        result.methods.push_back(summarize(Method::Semantic, std::move(semantic), opts.n_bins));
    }
    return result;
}

} // namespace detail

/// Scores in-memory records. `kernel` must be built for `labels` when the
/// semantic method is selected; its tau is reported in the result.
inline EvalResult evaluate_records(std::span<const LogitRecord> records, const LabelSet& labels,
                                   const SemanticKernel* kernel, EvalOptions opts) {
    if (records.empty()) throw Error(Errc::EmptyDataset, "dump contains no records");
    if (detail::wants(opts.method, Method::Semantic)) {
        if (kernel == nullptr) throw Error(Errc::InvalidConfig, "semantic scoring needs a kernel");
        opts.tau = kernel->tau();
    }
    std::vector<EvalRecord> standard, semantic;
    detail::score_into(records, labels, kernel, opts.k, opts.method, opts.threads, &standard, &semantic);
    return detail::finish(opts, std::move(standard), std::move(semantic));
}

/// Streams a dump, scoring it batch by batch. Only the label distributions are
/// retained, never the logits.
inline EvalResult run_eval(DumpReader& reader, const LabelSet& labels, const SemanticKernel* kernel, EvalOptions opts,
                           std::size_t batch_size = 1024) {
    if (detail::wants(opts.method, Method::Semantic)) {
        if (kernel == nullptr) throw Error(Errc::InvalidConfig, "semantic scoring needs a kernel");
        opts.tau = kernel->tau();
    }
    std::vector<EvalRecord> standard, semantic;
    std::vector<LogitRecord> batch;
    std::size_t seen = 0;
    for (;;) {
        batch.clear();
        while (batch.size() < batch_size) {
            auto r = reader.next();
            if (!r) break;
            batch.push_back(std::move(*r));
        }
        if (batch.empty()) break;
        seen += batch.size();
        detail::score_into(batch, labels, kernel, opts.k, opts.method, opts.threads, &standard, &semantic);
    }
    if (seen == 0) throw Error(Errc::EmptyDataset, "dump contains no records");
    return detail::finish(opts, std::move(standard), std::move(semantic));
}

inline EvalResult run_eval(const EmbeddingMatrix& E, const LabelSet& labels, std::istream& dump, EvalOptions opts) {
    labels.check_vocab(E.vocab_size());
    std::optional<SemanticKernel> kernel;
    if (detail::wants(opts.method, Method::Semantic)) kernel.emplace(build_kernel(E, labels, opts.tau, opts.threads));
    DumpReader reader(dump, E.vocab_size(), labels.size());
    return run_eval(reader, labels, kernel ? &*kernel : nullptr, opts);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepGrid {
    std::vector<std::size_t> k_values;
    std::vector<double> tau_values;

    /// K in {50, 100, 200, ..., 1000}, tau in {0.70, 0.75, ..., 0.95}.
    static SweepGrid defaults() {
        SweepGrid g;
        g.k_values = {50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
        g.tau_values = {0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
        return g;
    }
};

struct SweepCell {
    std::size_t k = 0;
    double tau = 0.0;
    MetricsReport report;
};

/// Semantic softmax at every (K, tau) cell, tau-major. One kernel per tau is
/// shared by all K values, and records are compacted once to their top
/// max(K) tokens, which leaves every cell's candidate sets unchanged.
inline std::vector<SweepCell> run_sweep(const EmbeddingMatrix& E, const LabelSet& labels,
                                        std::span<const LogitRecord> records, const SweepGrid& grid,
                                        std::size_t n_bins = kDefaultBins, std::size_t threads = 1) {
    if (grid.k_values.empty() || grid.tau_values.empty()) throw Error(Errc::InvalidConfig, "sweep grid is empty");
    if (records.empty()) throw Error(Errc::EmptyDataset, "dump contains no records");
    for (double tau : grid.tau_values) check_tau(tau);
    labels.check_vocab(E.vocab_size());

    const std::size_t k_max = *std::max_element(grid.k_values.begin(), grid.k_values.end());
    std::vector<LogitRecord> compact(records.size());
    detail::parallel_for(records.size(), threads,
                         [&](std::size_t i) { compact[i] = compact_record(records[i], labels, k_max); });

    std::vector<SweepCell> cells;
    cells.reserve(grid.k_values.size() * grid.tau_values.size());
    for (double tau : grid.tau_values) {
        const auto kernel = build_kernel(E, labels, tau, threads);
        for (std::size_t k : grid.k_values) {
            EvalOptions opts;
            opts.k = k;
            opts.tau = tau;
            opts.n_bins = n_bins;
            opts.method = MethodSelection::Semantic;
            opts.threads = threads;
            auto result = evaluate_records(compact, labels, &kernel, opts);
            cells.push_back({k, tau, result.methods.front().report});
        }
    }
    return cells;
}

} // namespace semx
