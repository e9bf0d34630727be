// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "semx/semx.hpp"
#include "test_support.hpp"

using namespace semx;
namespace st = semx::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

LogitRecord dense(std::vector<double> z) { return {"r", DenseLogits{std::move(z)}, HardLabel{0}}; }

std::vector<st::RandomInstance> random_instances(std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::vector<st::RandomInstance> out;
    for (int i = 0; i < count; ++i) out.push_back(st::random_instance(rng));
    return out;
}

// 1 ------------------------------------------------------------------------
Outcome semantic_matches_triple_loop() {
    const auto t0 = Clock::now();
    const auto instances = random_instances(1001, 200);
    double worst = 0.0;
    for (const auto& inst : instances) {
        const auto kernel = build_kernel(inst.E, inst.labels, inst.tau);
        const auto p = semantic_softmax(dense(inst.z), kernel, inst.labels, inst.E.vocab_size());
        const auto o = st::oracle_semantic(inst.E, inst.labels, inst.z, inst.tau);
        for (std::size_t l = 0; l < o.size(); ++l) worst = std::max(worst, std::abs(p.probs[l] - o[l]));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 5.0, fmt("max |diff| = %.3g over 200 instances, %.2f s", worst, secs)};
}

// 2 ------------------------------------------------------------------------
Outcome kernel_matches_double_loop() {
    const auto instances = random_instances(1001, 200);
    std::size_t mismatches = 0, compared = 0;
    for (const auto& inst : instances) {
        const auto kernel = build_kernel(inst.E, inst.labels, inst.tau);
        const auto naive = st::oracle_kernel(inst.E, inst.labels, inst.tau);
        for (std::size_t l = 0; l < naive.size(); ++l) {
            std::vector<double> dense_row(inst.E.vocab_size(), 0.0);
            for (const auto& e : kernel.rows()[l]) dense_row[e.token_id] = e.weight;
            for (std::size_t v = 0; v < dense_row.size(); ++v, ++compared) {
                if (dense_row[v] != naive[l][v]) ++mismatches;
            }
        }
    }
    return {mismatches == 0, fmt("%zu of %zu weights differ", mismatches, compared)};
}

// 3 ------------------------------------------------------------------------
Outcome orthogonal_reduction() {
    std::mt19937_64 rng(2002);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto inst = st::orthogonal_instance(rng);
        const auto kernel = build_kernel(inst.E, inst.labels, inst.tau);
        const auto sem = semantic_softmax(dense(inst.z), kernel, inst.labels, inst.E.vocab_size());
        const auto std_ = constrained_softmax(dense(inst.z), inst.labels);
        for (std::size_t l = 0; l < sem.probs.size(); ++l) worst = std::max(worst, std::abs(sem.probs[l] - std_.probs[l]));
    }
    return {worst <= 1e-9, fmt("max |semantic - standard| = %.3g over 100 instances", worst)};
}

// 4 ------------------------------------------------------------------------
Outcome high_tau_reduction() {
    const auto instances = random_instances(3003, 100);
    double worst = 0.0;
    std::size_t used = 0;
    for (const auto& inst : instances) {
        const double cross = std::max(0.0, st::max_cross_cosine(inst.E, inst.labels));
        const double tau = cross + (1.0 - cross) / 2.0;
        if (!(tau < 1.0)) continue;
        const auto kernel = build_kernel(inst.E, inst.labels, tau);
        bool self_only = true;
        for (const auto& row : kernel.rows()) self_only = self_only && row.size() == 1;
        if (!self_only) return {false, "kernel kept non-self weights above the largest cross cosine"};
        ++used;
        for (std::size_t k : {std::size_t{1}, std::size_t{4}, inst.E.vocab_size()}) {
            const auto sem = semantic_softmax(dense(inst.z), kernel, inst.labels, k);
            const auto std_ = constrained_softmax(dense(inst.z), inst.labels);
            for (std::size_t l = 0; l < sem.probs.size(); ++l) {
                worst = std::max(worst, std::abs(sem.probs[l] - std_.probs[l]));
            }
        }
    }
    return {worst <= 1e-9 && used > 0, fmt("max |semantic - standard| = %.3g over %zu instances", worst, used)};
}

// 5 ------------------------------------------------------------------------
Outcome shift_invariance() {
    const auto instances = random_instances(4004, 100);
    double worst = 0.0;
    for (const auto& inst : instances) {
        const auto kernel = build_kernel(inst.E, inst.labels, inst.tau);
        const auto base_sem = semantic_softmax(dense(inst.z), kernel, inst.labels, 8);
        const auto base_std = constrained_softmax(dense(inst.z), inst.labels);
        for (double c : {-50.0, -1.0, 0.0, 1.0, 50.0}) {
            auto z = inst.z;
            for (double& x : z) x += c;
            const auto sem = semantic_softmax(dense(z), kernel, inst.labels, 8);
            const auto std_ = constrained_softmax(dense(z), inst.labels);
            for (std::size_t l = 0; l < sem.probs.size(); ++l) {
                worst = std::max(worst, std::abs(sem.probs[l] - base_sem.probs[l]));
                worst = std::max(worst, std::abs(std_.probs[l] - base_std.probs[l]));
            }
        }
    }
    return {worst <= 1e-9, fmt("max change under shifts = %.3g", worst)};
}

// 6 ------------------------------------------------------------------------
Outcome five_token_fixture() {
    const st::FiveTokenFixture f;
    const auto kernel = build_kernel(f.E, f.labels, 0.8);
    const auto sem = semantic_softmax(f.record(), kernel, f.labels, 5);
    const auto std_ = constrained_softmax(f.record(), f.labels);
    const bool ok = std::abs(sem.probs[0] - 0.6) <= 1e-9 && std::abs(sem.probs[1] - 0.4) <= 1e-9 &&
                    std::abs(std_.probs[0] - 0.5) <= 1e-9 && std::abs(std_.probs[1] - 0.5) <= 1e-9;
    return {ok, fmt("semantic (%.12f, %.12f), standard (%.12f, %.12f)", sem.probs[0], sem.probs[1], std_.probs[0],
                    std_.probs[1])};
}

// 7 ------------------------------------------------------------------------
EvalRecord rec(std::vector<double> p, std::size_t truth) {
    return EvalRecord(LabelDistribution{std::move(p), Method::Standard, ""}, HardLabel{truth});
}

Outcome metric_oracles() {
    const std::vector<EvalRecord> ece_fix{rec({0.9, 0.1}, 0), rec({0.9, 0.1}, 0), rec({0.6, 0.4}, 0),
                                          rec({0.6, 0.4}, 1)};
    const double e = ece(ece_fix, 10);
    // Hand-binned in double: two bins of weight 1/2.
    const double e_oracle = 0.5 * std::abs(1.0 - 0.9) + 0.5 * std::abs(0.5 - 0.6);
    const bool ece_ok = e == e_oracle && std::abs(e - 0.1) <= 2 * std::numeric_limits<double>::epsilon() * 0.1;

    const double b = brier(std::vector<EvalRecord>{rec({0.8, 0.2}, 0)});
    const bool brier_ok = std::abs(b - 0.08) <= 1e-12;

    const double scores[] = {0.9, 0.5, 0.6, 0.3};
    const bool positives[] = {true, true, false, false};
    const double a = auroc_binary(scores, positives);
    const double ties[] = {0.4, 0.4, 0.4, 0.4};
    const bool tie_pos[] = {true, false, false, true};
    const double a_ties = auroc_binary(ties, tie_pos);

    const double f1 = macro_f1(std::vector<EvalRecord>{rec({0.9, 0.1}, 0), rec({0.8, 0.2}, 1), rec({0.3, 0.7}, 1)});
    const bool ok = ece_ok && brier_ok && a == 0.75 && a_ties == 0.5 && std::abs(f1 - 0.6667) <= 1e-4;
    return {ok, fmt("ECE %.17g (hand-binned %.17g), Brier %.17g, AUROC %.17g, ties %.17g, macro-F1 %.6f", e, e_oracle,
                    b, a, a_ties, f1)};
}

// 8 ------------------------------------------------------------------------
Outcome synthetic_bias() {
    const auto t0 = Clock::now();
    SynthConfig c; // seed 42, N 2000, 10 labels, s 5, rho 0.9, lambda 0.8, sigma 0.1
    const auto space = generate_space(c);
    const auto records = generate_records(c, space);
    const auto rep = oracle_report(c, space, records);
    const double secs = seconds_since(t0);
    const auto& s = rep.standard;
    const auto& m = rep.semantic;
    const bool ok = m.ece <= 0.5 * s.ece && m.mean_confidence <= s.mean_confidence &&
                    m.macro_f1 >= s.macro_f1 - 0.01 && secs < 60.0;
    return {ok, fmt("ECE std %.4f sem %.4f (ratio %.3f); mean conf std %.4f sem %.4f; macro-F1 std %.4f sem %.4f; "
                    "%.2f s",
                    s.ece, m.ece, m.ece / s.ece, s.mean_confidence, m.mean_confidence, s.macro_f1, m.macro_f1, secs)};
}

// 9 ------------------------------------------------------------------------
Outcome table_rows() {
    std::ifstream in(SEMX_TEST_DATA_DIR "/toxicity_rows.csv");
    if (!in) return {false, "cannot open toxicity_rows.csv"};
    std::string line;
    std::getline(in, line); // header
    std::vector<EvalRecord> standard, semantic;
    while (std::getline(in, line)) {
        double human = 0, std_score = 0, sem_score = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &human, &std_score, &sem_score) != 3) continue;
        const SoftLabel truth{{1.0 - human, human}};
        standard.emplace_back(LabelDistribution{{1.0 - std_score, std_score}, Method::Standard, ""}, truth);
        semantic.emplace_back(LabelDistribution{{1.0 - sem_score, sem_score}, Method::Semantic, ""}, truth);
    }
    if (standard.size() != 20) return {false, fmt("expected 20 rows, read %zu", standard.size())};
    const double mae_std = soft_alignment_mae(standard);
    const double mae_sem = soft_alignment_mae(semantic);
    return {mae_sem < mae_std, fmt("MAE vs human: standard %.4f, semantic %.4f", mae_std, mae_sem)};
}

// 10 -----------------------------------------------------------------------
Outcome sweep_structure() {
    SynthConfig c;
    c.n_distractors = 1100; // vocabulary above the largest K in the grid
    c.n_examples = 200;
    const auto space = generate_space(c);
    const auto records = generate_records(c, space);
    std::ostringstream dump;
    write_dump(records, dump);
    const std::string dump_text = dump.str();

    const auto grid = SweepGrid::defaults();
    const auto cells = run_sweep(space.embeddings, space.labels, records, grid);
    std::ostringstream csv;
    write_sweep_csv(cells, csv);
    std::size_t rows = 0;
    std::istringstream lines(csv.str());
    for (std::string l; std::getline(lines, l);) ++rows;
    rows -= 1; // header

    double worst = 0.0;
    std::size_t fallback_mismatch = 0;
    for (const auto& cell : cells) {
        EvalOptions opts;
        opts.k = cell.k;
        opts.tau = cell.tau;
        opts.method = MethodSelection::Semantic;
        std::istringstream in(dump_text);
        const auto single = run_eval(space.embeddings, space.labels, in, opts).methods.front().report;
        worst = std::max({worst, std::abs(single.ece - cell.report.ece), std::abs(single.brier - cell.report.brier),
                          std::abs(single.macro_f1 - cell.report.macro_f1)});
        if (single.auroc && cell.report.auroc) worst = std::max(worst, std::abs(*single.auroc - *cell.report.auroc));
        if (single.auroc.has_value() != cell.report.auroc.has_value()) worst = INFINITY;
        if (single.fallback_count != cell.report.fallback_count) ++fallback_mismatch;
    }
    return {rows == 66 && worst <= 1e-12 && fallback_mismatch == 0,
            fmt("%zu rows; max |sweep - standalone| = %.3g; fallback mismatches %zu", rows, worst, fallback_mismatch)};
}

// 11 -----------------------------------------------------------------------
bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool same_record(const LogitRecord& a, const LogitRecord& b) {
    if (a.example_id != b.example_id || a.logits.index() != b.logits.index()) return false;
    if (const auto* d = std::get_if<DenseLogits>(&a.logits)) {
        if (!same_bits(d->values, std::get<DenseLogits>(b.logits).values)) return false;
    } else {
        const auto& x = std::get<SparseLogits>(a.logits);
        const auto& y = std::get<SparseLogits>(b.logits);
        if (x.kind != y.kind || x.entries.size() != y.entries.size()) return false;
        for (std::size_t i = 0; i < x.entries.size(); ++i) {
            if (x.entries[i].token_id != y.entries[i].token_id ||
                std::memcmp(&x.entries[i].score, &y.entries[i].score, sizeof(double)) != 0) {
                return false;
            }
        }
    }
    if (a.truth.has_value() != b.truth.has_value()) return false;
    if (!a.truth) return true;
    if (a.truth->index() != b.truth->index()) return false;
    if (const auto* h = std::get_if<HardLabel>(&*a.truth)) return h->index == std::get<HardLabel>(*b.truth).index;
    return same_bits(std::get<SoftLabel>(*a.truth).probs, std::get<SoftLabel>(*b.truth).probs);
}

Outcome round_trips() {
    std::mt19937_64 rng(5005);
    std::normal_distribution<double> g(0.0, 5.0);
    std::size_t failures = 0;
    for (int it = 0; it < 1000; ++it) {
        const std::size_t V = 2 + rng() % 40;
        const std::size_t d = 1 + rng() % 12;

        // Embeddings: arbitrary finite float bit patterns.
        std::vector<float> data(V * d);
        for (auto& x : data) {
            do {
                x = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
            } while (!std::isfinite(x));
        }
        const EmbeddingMatrix E(V, d, data);
        std::stringstream eb(std::ios::in | std::ios::out | std::ios::binary);
        write_embeddings(E, eb);
        if (!(read_embeddings(eb) == E)) ++failures;

        // Label manifest.
        const std::size_t n = 2 + rng() % std::min<std::size_t>(V - 1, 8);
        std::vector<TokenId> ids(V);
        for (std::size_t i = 0; i < V; ++i) ids[i] = static_cast<TokenId>(i);
        std::shuffle(ids.begin(), ids.end(), rng);
        std::vector<Label> lv;
        for (std::size_t i = 0; i < std::min(n, V); ++i) {
            lv.push_back({"lab el/" + std::to_string(it) + "#" + std::to_string(i), ids[i]});
        }
        const LabelSet labels(lv);
        std::stringstream lb;
        write_labels(labels, lb);
        if (!(read_labels(lb) == labels)) ++failures;

        // Dump: a dense and a sparse record, hard and soft truth.
        std::vector<LogitRecord> recs;
        std::vector<double> z(V);
        for (auto& x : z) x = g(rng) * std::pow(10.0, static_cast<int>(rng() % 7) - 3);
        recs.push_back({"d" + std::to_string(it), DenseLogits{z}, HardLabel{rng() % labels.size()}});
        std::vector<SparseEntry> entries;
        for (TokenId t = 0; t < V; ++t) entries.push_back({t, g(rng)});
        std::sort(entries.begin(), entries.end(), [](const SparseEntry& a, const SparseEntry& b) { return a.score > b.score; });
        std::vector<double> soft(labels.size());
        double total = 0.0;
        for (auto& x : soft) total += (x = std::uniform_real_distribution<double>(0.01, 1.0)(rng));
        for (auto& x : soft) x /= total;
        recs.push_back({"s\"" + std::to_string(it), SparseLogits{entries, (rng() & 1) ? ScoreKind::Logit : ScoreKind::LogProb},
                        SoftLabel{soft}});
        recs.push_back({"n" + std::to_string(it), DenseLogits{z}, std::nullopt});
        std::stringstream db;
        write_dump(recs, db);
        const auto back = read_dump(db, V, labels.size());
        if (back.size() != recs.size()) {
            ++failures;
            continue;
        }
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (!same_record(recs[i], back[i])) ++failures;
        }
    }
    return {failures == 0, fmt("%zu mismatches over 1000 iterations", failures)};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"semantic softmax matches the triple-loop oracle (200 instances, 1e-12, < 5 s)", semantic_matches_triple_loop},
        {"kernel equals the naive double loop exactly", kernel_matches_double_loop},
        {"orthogonal geometry: semantic == standard within 1e-9 (100 instances)", orthogonal_reduction},
        {"high-tau: self weights only, semantic == standard within 1e-9", high_tau_reduction},
        {"logit shifts {-50,-1,0,1,50} change neither method by more than 1e-9", shift_invariance},
        {"5-token fixture: semantic (0.6, 0.4), standard (0.5, 0.5)", five_token_fixture},
        {"metric fixtures: ECE 0.1, Brier 0.08, AUROC 0.75, ties 0.5, macro-F1 0.6667", metric_oracles},
        {"synthetic bias run: ECE halved, confidence lower, F1 held (seed 42, < 60 s)", synthetic_bias},
        {"toxicity rows: semantic scores track human means better than standard", table_rows},
        {"default sweep emits 66 rows equal to standalone evaluations (1e-12)", sweep_structure},
        {"round trips of embeddings, labels and dumps are bit-exact (1000 iterations)", round_trips},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s [%2zu] %s -- %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
