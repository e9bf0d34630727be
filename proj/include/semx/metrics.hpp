#pragma once

// Calibration and discrimination metrics over evaluated records: ECE with
// reliability bins, multiclass Brier, Mann-Whitney AUROC (binary and macro
// one-vs-rest), macro-F1, confidence histograms and soft-target alignment.
//
// Binning: n equal-width bins over [0, 1]; bin b covers (b/n, (b+1)/n] except
// bin 0, which also includes 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "semx/core_types.hpp"

namespace semx {

inline constexpr std::size_t kDefaultBins = 10;

struct ReliabilityBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct ReliabilityBins {
    std::size_t n_bins = 0;
    std::vector<ReliabilityBin> bins;
    double ece = 0.0;
};

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

namespace detail {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline void require_nonempty(std::size_t n) {
    if (n == 0) throw Error(Errc::EmptyDataset, "no records to evaluate");
}

inline void require_bins(std::size_t n_bins) {
    if (n_bins < 1) throw Error(Errc::InvalidConfig, "bin count must be at least 1");
}

inline double bin_edge(std::size_t b, std::size_t n_bins) noexcept {
    return static_cast<double>(b) / static_cast<double>(n_bins);
}

/// Bin index for a confidence under the (lo, hi] convention.
inline std::size_t bin_index(double confidence, std::size_t n_bins) noexcept {
    if (!(confidence > 0.0)) return 0;
    const double scaled = std::ceil(confidence * static_cast<double>(n_bins));
    std::size_t b = scaled < 1.0 ? 0 : static_cast<std::size_t>(scaled) - 1;
    b = std::min(b, n_bins - 1);
    // Correct for rounding in the product against the exact edge values.
    while (b > 0 && confidence <= bin_edge(b, n_bins)) --b;
    while (b + 1 < n_bins && confidence > bin_edge(b + 1, n_bins)) ++b;
    return b;
}

inline double confidence(const EvalRecord& r) noexcept {
    return *std::max_element(r.distribution.probs.begin(), r.distribution.probs.end());
}

inline bool correct(const EvalRecord& r) noexcept { return argmax(r.distribution.probs) == hard_index(r.truth); }

inline std::vector<double> target_vector(const Truth& truth, std::size_t n) {
    if (const auto* soft = std::get_if<SoftLabel>(&truth)) return soft->probs;
    std::vector<double> y(n, 0.0);
    y[std::get<HardLabel>(truth).index] = 1.0;
    return y;
}

} // namespace detail

inline ReliabilityBins reliability_bins(std::span<const EvalRecord> records, std::size_t n_bins = kDefaultBins) {
    detail::require_nonempty(records.size());
    detail::require_bins(n_bins);

    std::vector<detail::CompensatedSum> conf_sum(n_bins);
    std::vector<std::size_t> correct_count(n_bins, 0);
    std::vector<std::size_t> count(n_bins, 0);
    for (const auto& r : records) {
        const double c = detail::confidence(r);
        const std::size_t b = detail::bin_index(c, n_bins);
        conf_sum[b].add(c);
        count[b] += 1;
        correct_count[b] += detail::correct(r) ? 1 : 0;
    }

    ReliabilityBins out;
    out.n_bins = n_bins;
    out.bins.resize(n_bins);
    detail::CompensatedSum ece;
    const auto n = static_cast<double>(records.size());
    for (std::size_t b = 0; b < n_bins; ++b) {
        auto& bin = out.bins[b];
        bin.lower = detail::bin_edge(b, n_bins);
        bin.upper = detail::bin_edge(b + 1, n_bins);
        bin.count = count[b];
        if (count[b] == 0) continue;
        const auto nb = static_cast<double>(count[b]);
        bin.mean_confidence = conf_sum[b].value() / nb;
        bin.accuracy = static_cast<double>(correct_count[b]) / nb;
        ece.add((nb / n) * std::abs(bin.accuracy - bin.mean_confidence));
    }
    out.ece = ece.value();
    return out;
}

inline double ece(std::span<const EvalRecord> records, std::size_t n_bins = kDefaultBins) {
    return reliability_bins(records, n_bins).ece;
}

inline double brier(std::span<const EvalRecord> records) {
    detail::require_nonempty(records.size());
    detail::CompensatedSum total;
    for (const auto& r : records) {
        const auto& p = r.distribution.probs;
        const auto y = detail::target_vector(r.truth, p.size());
        for (std::size_t c = 0; c < p.size(); ++c) {
            const double d = p[c] - y[c];
            total.add(d * d);
        }
    }
    return total.value() / static_cast<double>(records.size());
}

/// Mann-Whitney AUROC with average ranks for tied scores.
inline double auroc_binary(std::span<const double> scores, std::span<const bool> positives) {
    if (scores.size() != positives.size()) {
        throw Error(Errc::DimensionMismatch, "scores and labels differ in length");
    }
    const auto n_pos = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
    const std::size_t n_neg = positives.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw Error(Errc::DegenerateClasses, "AUROC needs at least one positive and one negative");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Ranks are 1-based; a tie group spanning positions [i, j) shares (i + 1 + j) / 2.
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = static_cast<double>(i + 1 + j) / 2.0;
        for (std::size_t t = i; t < j; ++t) {
            if (positives[order[t]]) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const auto np = static_cast<double>(n_pos);
    const auto nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

/// One-vs-rest AUROC averaged over classes that have both positive and
/// negative support.
inline double auroc_macro_ovr(std::span<const EvalRecord> records) {
    detail::require_nonempty(records.size());
    const std::size_t n = records.front().distribution.probs.size();
    if (n < 2) throw Error(Errc::DegenerateClasses, "AUROC needs at least two classes");

    std::vector<std::size_t> gold(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) gold[i] = hard_index(records[i].truth);

    detail::CompensatedSum total;
    std::size_t used = 0;
    std::vector<double> scores(records.size());
    std::unique_ptr<bool[]> pos(new bool[records.size()]);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            scores[i] = records[i].distribution.probs[c];
            pos[i] = gold[i] == c;
            n_pos += pos[i] ? 1 : 0;
        }
        if (n_pos == 0 || n_pos == records.size()) continue;
        total.add(auroc_binary(scores, std::span<const bool>(pos.get(), records.size())));
        ++used;
    }
    if (used == 0) throw Error(Errc::DegenerateClasses, "no class has both positive and negative examples");
    return total.value() / static_cast<double>(used);
}

/// Macro-averaged F1 of argmax predictions. Classes that are neither predicted
/// nor present in the gold labels are left out of the average.
inline double macro_f1(std::span<const EvalRecord> records) {
    detail::require_nonempty(records.size());
    const std::size_t n = records.front().distribution.probs.size();
    std::vector<std::size_t> tp(n, 0), fp(n, 0), fn(n, 0);
    for (const auto& r : records) {
        const std::size_t pred = argmax(r.distribution.probs);
        const std::size_t gold = hard_index(r.truth);
        if (pred == gold) {
            ++tp[pred];
        } else {
            ++fp[pred];
            ++fn[gold];
        }
    }
    detail::CompensatedSum total;
    std::size_t used = 0;
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t predicted = tp[c] + fp[c];
        const std::size_t actual = tp[c] + fn[c];
        if (predicted == 0 && actual == 0) continue;
        ++used;
        const double precision = predicted == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(predicted);
        const double recall = actual == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(actual);
        if (precision + recall > 0.0) total.add(2.0 * precision * recall / (precision + recall));
    }
    return total.value() / static_cast<double>(used);
}

inline std::vector<HistogramBin> confidence_histogram(std::span<const EvalRecord> records,
                                                      std::size_t n_bins = kDefaultBins) {
    detail::require_nonempty(records.size());
    detail::require_bins(n_bins);
    std::vector<HistogramBin> out(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        out[b].lower = detail::bin_edge(b, n_bins);
        out[b].upper = detail::bin_edge(b + 1, n_bins);
    }
    for (const auto& r : records) ++out[detail::bin_index(detail::confidence(r), n_bins)].count;
    return out;
}

inline double mean_confidence(std::span<const EvalRecord> records) {
    detail::require_nonempty(records.size());
    detail::CompensatedSum total;
    for (const auto& r : records) total.add(detail::confidence(r));
    return total.value() / static_cast<double>(records.size());
}

/// Mean |p(positive) - y(positive)| for binary records with soft truth.
inline double soft_alignment_mae(std::span<const EvalRecord> records, std::size_t positive_index = 1) {
    detail::require_nonempty(records.size());
    detail::CompensatedSum total;
    for (const auto& r : records) {
        if (r.distribution.probs.size() != 2) throw Error(Errc::NotBinary, "soft alignment needs exactly two labels");
        const auto* soft = std::get_if<SoftLabel>(&r.truth);
        if (soft == nullptr) throw Error(Errc::MissingSoftTruth, "record '" + r.distribution.example_id + "' has hard truth");
        total.add(std::abs(r.distribution.probs[positive_index] - soft->probs[positive_index]));
    }
    return total.value() / static_cast<double>(records.size());
}

/// Full report for one method. AUROC is left empty when no class has both
/// positive and negative support.
inline MetricsReport evaluate(std::span<const EvalRecord> records, std::size_t n_bins = kDefaultBins) {
    MetricsReport report;
    report.ece = ece(records, n_bins);
    report.brier = brier(records);
    try {
        report.auroc = auroc_macro_ovr(records);
    } catch (const Error& e) {
        if (e.code() != Errc::DegenerateClasses) throw;
    }
    report.macro_f1 = macro_f1(records);
    report.mean_confidence = mean_confidence(records);
    report.n_examples = records.size();
    report.n_bins = n_bins;
    report.fallback_count = static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const EvalRecord& r) {
        return r.distribution.method == Method::SemanticFellBack;
    }));
    return report;
}

} // namespace semx
