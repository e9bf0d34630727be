#pragma once

// Synthetic embedding spaces with planted synonym clusters, and logit records
// whose label evidence is partly diverted onto those synonyms. The true label
// distribution of every record is known, so the effect of discarding synonym
// mass can be measured without a language model.
//
// Sampling uses std::mt19937_64 for raw bits and the transforms below for
// every distribution (uniform, Box-Muller Gaussian, Marsaglia-Tsang gamma,
// Dirichlet as normalized gammas), so output is identical across standard
// library implementations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "semx/core_types.hpp"
#include "semx/decode.hpp"
#include "semx/kernel.hpp"
#include "semx/metrics.hpp"

namespace semx {

struct SynthConfig {
    std::size_t n_labels = 10;
    std::size_t synonyms_per_label = 5;
    std::size_t n_distractors = 20;
    std::size_t dim = 64;
    /// Cosine between each synonym and its label anchor.
    double synonym_cosine = 0.9;
    /// Fraction of a label's mass moved from its token onto its synonyms.
    double leakage = 0.8;
    double noise_sigma = 0.1;
    std::size_t n_examples = 2000;
    std::uint64_t seed = 42;
    double dirichlet_alpha = 1.0;

    [[nodiscard]] std::size_t vocab_size() const noexcept {
        return n_labels * (1 + synonyms_per_label) + n_distractors;
    }
};

/// Floor applied to every token's target probability before renormalization.
inline constexpr double kSynthMassFloor = 1e-6;
inline constexpr std::size_t kMaxDistractorRedraws = 1000;

struct SynthSpace {
    EmbeddingMatrix embeddings;
    LabelSet labels;
    /// synonyms[l] lists the token ids planted around label l.
    std::vector<std::vector<TokenId>> synonyms;
};

/// Draws from a seeded 64-bit Mersenne Twister with library-independent
/// transforms.
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform on (0, 1].
    double uniform_open_low() noexcept { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    double gaussian() noexcept {
        const double u1 = uniform_open_low();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double gamma(double alpha) noexcept {
        if (alpha < 1.0) {
            const double boost = std::pow(uniform_open_low(), 1.0 / alpha);
            return gamma(alpha + 1.0) * boost;
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            const double x = gaussian();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform_open_low();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    /// Symmetric Dirichlet draw; redrawn until every component is positive.
    std::vector<double> dirichlet(std::size_t n, double alpha) {
        std::vector<double> out(n);
        for (;;) {
            double sum = 0.0;
            bool positive = true;
            for (auto& g : out) {
                g = gamma(alpha);
                positive = positive && g > 0.0;
                sum += g;
            }
            if (!positive || !(sum > 0.0)) continue;
            for (auto& g : out) g /= sum;
            return out;
        }
    }

private:
    std::mt19937_64 engine_;
};

namespace detail {

// Per-phase seed offsets.
inline constexpr std::uint64_t kSpacePhase = 0;
inline constexpr std::uint64_t kTruthPhase = 1;
inline constexpr std::uint64_t kNoisePhase = 2;

inline std::uint64_t phase_seed(std::uint64_t seed, std::uint64_t phase) noexcept {
    return seed + phase * 0x9E3779B97F4A7C15ULL;
}

inline std::vector<double> random_unit(SynthRng& rng, std::size_t dim) {
    for (;;) {
        std::vector<double> v(dim);
        double sq = 0.0;
        for (auto& x : v) {
            x = rng.gaussian();
            sq += x * x;
        }
        const double n = std::sqrt(sq);
        if (n < 1e-8) continue;
        for (auto& x : v) x /= n;
        return v;
    }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
    return acc;
}

/// Removes the components of v along each (unit) basis vector and
/// renormalizes. Returns false when v collapses.
inline bool orthonormalize_against(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
    for (const auto& b : basis) {
        const double proj = dot(v, b);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= proj * b[k];
    }
    const double n = std::sqrt(dot(v, v));
    if (n < 1e-8) return false;
    for (auto& x : v) x /= n;
    return true;
}

} // namespace detail

inline void validate_synth_config(const SynthConfig& c) {
    if (c.n_labels < 1) throw Error(Errc::InvalidConfig, "n_labels must be at least 1");
    if (c.vocab_size() < 2) throw Error(Errc::InvalidConfig, "synthetic vocabulary needs at least 2 tokens");
    if (c.dim < c.n_labels) {
        throw Error(Errc::DimTooSmall, "dim " + std::to_string(c.dim) + " cannot hold " + std::to_string(c.n_labels) +
                                           " orthonormal anchors");
    }
    if (!(c.synonym_cosine > 0.0 && c.synonym_cosine < 1.0)) {
        throw Error(Errc::InvalidConfig, "synonym cosine must lie in (0, 1)");
    }
    if (!(c.leakage >= 0.0 && c.leakage <= 1.0)) throw Error(Errc::InvalidConfig, "leakage must lie in [0, 1]");
    if (!(c.noise_sigma >= 0.0) || !std::isfinite(c.noise_sigma)) {
        throw Error(Errc::InvalidConfig, "noise sigma must be finite and non-negative");
    }
    if (!(c.dirichlet_alpha > 0.0) || !std::isfinite(c.dirichlet_alpha)) {
        throw Error(Errc::InvalidConfig, "dirichlet alpha must be positive");
    }
}

/// Token layout: label anchors 0..n-1, then each label's synonyms in label
/// order, then distractors.
inline SynthSpace generate_space(const SynthConfig& config) {
    validate_synth_config(config);
    SynthRng rng(detail::phase_seed(config.seed, detail::kSpacePhase));
    const std::size_t d = config.dim;
    const double rho = config.synonym_cosine;
    const double ortho = std::sqrt(1.0 - rho * rho);

    std::vector<std::vector<double>> anchors;
    while (anchors.size() < config.n_labels) {
        auto v = detail::random_unit(rng, d);
        if (detail::orthonormalize_against(v, anchors)) anchors.push_back(std::move(v));
    }

    std::vector<std::vector<double>> rows = anchors;
    std::vector<std::vector<TokenId>> synonyms(config.n_labels);
    for (std::size_t l = 0; l < config.n_labels; ++l) {
        for (std::size_t j = 0; j < config.synonyms_per_label; ++j) {
            std::vector<double> u;
            do {
                u = detail::random_unit(rng, d);
            } while (!detail::orthonormalize_against(u, {anchors[l]}));
            std::vector<double> syn(d);
            for (std::size_t k = 0; k < d; ++k) syn[k] = rho * anchors[l][k] + ortho * u[k];
            synonyms[l].push_back(static_cast<TokenId>(rows.size()));
            rows.push_back(std::move(syn));
        }
    }

    for (std::size_t t = 0; t < config.n_distractors; ++t) {
        std::size_t attempts = 0;
        for (;;) {
            if (attempts++ >= kMaxDistractorRedraws) {
                throw Error(Errc::DistractorRejectionExceeded,
                            "could not place distractor " + std::to_string(t) + " away from all anchors");
            }
            auto v = detail::random_unit(rng, d);
            bool far = true;
            for (const auto& a : anchors) far = far && std::abs(detail::dot(v, a)) < rho / 2.0;
            if (far) {
                rows.push_back(std::move(v));
                break;
            }
        }
    }

    std::vector<float> data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) {
        for (double x : r) data.push_back(static_cast<float>(x));
    }
    std::vector<Label> labels;
    for (std::size_t l = 0; l < config.n_labels; ++l) {
        labels.push_back({"label_" + std::to_string(l), static_cast<TokenId>(l)});
    }
    return {EmbeddingMatrix(rows.size(), d, std::move(data)), LabelSet(std::move(labels)), std::move(synonyms)};
}

/// One dense record per example, with the sampled label distribution as soft
/// truth.
inline std::vector<LogitRecord> generate_records(const SynthConfig& config, const SynthSpace& space) {
    validate_synth_config(config);
    SynthRng truth_rng(detail::phase_seed(config.seed, detail::kTruthPhase));
    SynthRng noise_rng(detail::phase_seed(config.seed, detail::kNoisePhase));
    const std::size_t V = space.embeddings.vocab_size();
    const std::size_t n = space.labels.size();
    const double lambda = config.leakage;

    std::vector<LogitRecord> records;
    records.reserve(config.n_examples);
    std::vector<double> q(V);
    for (std::size_t i = 0; i < config.n_examples; ++i) {
        auto pi = truth_rng.dirichlet(n, config.dirichlet_alpha);

        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t l = 0; l < n; ++l) {
            q[space.labels[l].token_id] = (1.0 - lambda) * pi[l];
            const auto& syn = space.synonyms[l];
            for (TokenId t : syn) q[t] = lambda * pi[l] / static_cast<double>(syn.size());
        }
        double total = 0.0;
        for (auto& x : q) {
            x = std::max(x, kSynthMassFloor);
            total += x;
        }

        DenseLogits logits;
        logits.values.resize(V);
        for (std::size_t t = 0; t < V; ++t) {
            logits.values[t] = std::log(q[t] / total) + config.noise_sigma * noise_rng.gaussian();
        }

        char id[32];
        std::snprintf(id, sizeof id, "synth-%06zu", i);
        records.push_back({id, std::move(logits), SoftLabel{std::move(pi)}});
    }
    return records;
}

/// Default evaluation threshold: midway between the distractor bound rho/2
/// and the synonym cosine rho, so synonyms pass and distractors fail.
inline double default_synth_tau(const SynthConfig& config) noexcept { return 0.75 * config.synonym_cosine; }

struct OracleReports {
    MetricsReport standard;
    MetricsReport semantic;
    std::vector<EvalRecord> standard_records;
    std::vector<EvalRecord> semantic_records;
};

/// Scores the records with both methods (K = |V|) against hard truth
/// argmax(pi) and reports metrics for each.
inline OracleReports oracle_report(const SynthConfig& config, const SynthSpace& space,
                                   const std::vector<LogitRecord>& records, std::optional<double> tau = std::nullopt,
                                   std::size_t n_bins = kDefaultBins) {
    const double t = tau.value_or(default_synth_tau(config));
    const auto kernel = build_kernel(space.embeddings, space.labels, t);
    const std::size_t k = space.embeddings.vocab_size();

    OracleReports out;
    out.standard_records.reserve(records.size());
    out.semantic_records.reserve(records.size());
    for (const auto& r : records) {
        if (!r.truth) throw Error(Errc::MissingTruth, "record '" + r.example_id + "' has no truth");
        const Truth hard = HardLabel{hard_index(*r.truth)};
        out.standard_records.emplace_back(constrained_softmax(r, space.labels), hard);
        out.semantic_records.emplace_back(semantic_softmax(r, kernel, space.labels, k), hard);
    }
    out.standard = evaluate(out.standard_records, n_bins);
    out.semantic = evaluate(out.semantic_records, n_bins);
    return out;
}

} // namespace semx
