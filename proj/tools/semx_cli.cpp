// semx: command-line front end (kernel, eval, sweep, synth, fetch).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "semx/io/fetch.hpp"
#include "semx/semx.hpp"

namespace fs = std::filesystem;
using namespace semx;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Validation: return 1;
    case ErrorCategory::Io: return 2;
    case ErrorCategory::Remote: return 3;
    }
    return 1;
}

struct Inputs {
    std::string embeddings;
    std::string labels;
};

struct Loaded {
    EmbeddingMatrix E;
    LabelSet labels;
};

Loaded load(const Inputs& in) {
    auto E = read_embeddings(fs::path(in.embeddings));
    auto labels = read_labels(fs::path(in.labels));
    if (labels.size() < 2) throw Error(Errc::InvalidConfig, "classification needs at least 2 labels");
    labels.check_vocab(E.vocab_size());
    return {std::move(E), std::move(labels)};
}

void add_inputs(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--embeddings", in.embeddings, "binary embedding matrix")->required()->check(CLI::ExistingFile);
    cmd->add_option("--labels", in.labels, "label manifest (name<TAB>token_id)")->required()->check(CLI::ExistingFile);
}

void check_kernel_fits(const SemanticKernel& k, const Loaded& d) {
    std::vector<TokenId> ids;
    for (const auto& l : d.labels) ids.push_back(l.token_id);
    if (k.vocab_size() != d.E.vocab_size() || k.label_tokens() != ids) {
        throw Error(Errc::KernelLabelMismatch, "cached kernel was built for different embeddings or labels");
    }
}

// --- kernel -----------------------------------------------------------------

struct KernelArgs {
    Inputs in;
    double tau = kDefaultTau;
    std::size_t threads = 1;
    std::string out;
};

int cmd_kernel(const KernelArgs& a) {
    const auto d = load(a.in);
    const auto kernel = build_kernel(d.E, d.labels, a.tau, a.threads);
    write_kernel(kernel, fs::path(a.out));
    std::size_t entries = 0;
    for (const auto& row : kernel.rows()) entries += row.size();
    std::fprintf(stderr, "kernel: %zu labels, %zu weights, tau %.4g -> %s\n", kernel.n_labels(), entries, a.tau,
                 a.out.c_str());
    return 0;
}

// --- eval ---------------------------------------------------------------------

MethodSelection parse_method(const std::string& s) {
    static const std::map<std::string, MethodSelection> m{
        {"standard", MethodSelection::Standard}, {"semantic", MethodSelection::Semantic}, {"both", MethodSelection::Both}};
    return m.at(s);
}

struct EvalArgs {
    Inputs in;
    std::string dump;
    std::string kernel;
    std::size_t k = kDefaultTopK;
    double tau = kDefaultTau;
    std::size_t bins = kDefaultBins;
    std::string method = "both";
    std::string out_dir;
    bool audit = false;
    bool svg = false;
    std::size_t threads = 1;
};

int cmd_eval(const EvalArgs& a, const CLI::App& cmd) {
    const auto d = load(a.in);
    EvalOptions opts;
    opts.k = a.k;
    opts.tau = a.tau;
    opts.n_bins = a.bins;
    opts.method = parse_method(a.method);
    opts.threads = a.threads;

    std::optional<SemanticKernel> kernel;
    if (opts.method != MethodSelection::Standard) {
        if (!a.kernel.empty()) {
            kernel.emplace(read_kernel(fs::path(a.kernel)));
            check_kernel_fits(*kernel, d);
            if (cmd.count("--tau") > 0 && kernel->tau() != a.tau) {
                throw Error(Errc::InvalidConfig, "--tau disagrees with the cached kernel");
            }
        } else {
            kernel.emplace(build_kernel(d.E, d.labels, a.tau, a.threads));
        }
    }

    std::ifstream dump(a.dump);
    if (!dump) throw Error(Errc::IoError, "cannot open " + a.dump);
    DumpReader reader(dump, d.E.vocab_size(), d.labels.size());
    const auto result = run_eval(reader, d.labels, kernel ? &*kernel : nullptr, opts);

    if (a.out_dir.empty()) {
        write_metrics_csv(result, std::cout);
    } else {
        write_eval_outputs(result, fs::path(a.out_dir), OutputOptions{a.svg, a.audit});
        write_metrics_csv(result, std::cout);
    }
    return 0;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
    Inputs in;
    std::string dump;
    std::vector<std::size_t> k_values;
    std::vector<double> tau_values;
    std::size_t bins = kDefaultBins;
    std::string out;
    std::size_t threads = 1;
};

int cmd_sweep(const SweepArgs& a) {
    const auto d = load(a.in);
    auto grid = SweepGrid::defaults();
    if (!a.k_values.empty()) grid.k_values = a.k_values;
    if (!a.tau_values.empty()) grid.tau_values = a.tau_values;
    const auto records = read_dump(fs::path(a.dump), d.E.vocab_size(), d.labels.size());
    const auto cells = run_sweep(d.E, d.labels, records, grid, a.bins, a.threads);
    if (a.out.empty()) {
        write_sweep_csv(cells, std::cout);
        return 0;
    }
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw Error(Errc::IoError, "cannot open " + a.out + " for writing");
    write_sweep_csv(cells, f);
    f.flush();
    if (!f) {
        f.close();
        fs::remove(out);
        throw Error(Errc::IoError, "failed writing " + a.out);
    }
    return 0;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
    SynthConfig config;
    std::string out_dir;
    std::size_t bins = kDefaultBins;
    std::optional<double> tau;
};

int cmd_synth(const SynthArgs& a) {
    const auto& c = a.config;
    const auto space = generate_space(c);
    const auto records = generate_records(c, space);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    write_embeddings(space.embeddings, dir / "embeddings.bin");
    write_labels(space.labels, dir / "labels.tsv");
    write_dump(records, dir / "dump.jsonl");

    // Reference scores against argmax truth, for a quick look at the run.
    const auto rep = oracle_report(c, space, records, a.tau, a.bins);
    std::ofstream summary(dir / "oracle_metrics.csv");
    summary << "method,tau,ece,brier,auroc,macro_f1,mean_confidence\n";
    const double tau = a.tau.value_or(default_synth_tau(c));
    for (const auto& [name, r] : {std::pair{"standard", &rep.standard}, std::pair{"semantic", &rep.semantic}}) {
        summary << name << ',' << detail::fmt6(tau) << ',' << detail::fmt6(r->ece) << ',' << detail::fmt6(r->brier) << ','
                << detail::fmt6(r->auroc) << ',' << detail::fmt6(r->macro_f1) << ','
                << detail::fmt6(r->mean_confidence) << '\n';
    }
    if (!summary) throw Error(Errc::IoError, "failed writing oracle_metrics.csv");
    std::fprintf(stderr, "synth: |V| %zu, %zu labels, %zu records -> %s\n", space.embeddings.vocab_size(),
                 space.labels.size(), records.size(), a.out_dir.c_str());
    return 0;
}

// --- fetch ------------------------------------------------------------------

struct FetchArgs {
    EndpointConfig endpoint;
    std::string prompts;
    std::string vocab_map;
    std::string out;
    std::size_t k = kDefaultTopK;
    long timeout_ms = 30000;
};

int cmd_fetch(FetchArgs a) {
    if (const char* key = std::getenv("SEMX_API_KEY")) a.endpoint.api_key = key;
    a.endpoint.timeout = std::chrono::milliseconds(a.timeout_ms);
    const auto stats = fetch_logprobs(a.endpoint, fs::path(a.prompts), fs::path(a.vocab_map), a.k, fs::path(a.out));
    std::fprintf(stderr, "fetch: %zu prompts, %zu pairs kept, %zu unmapped, %zu capped responses, %zu retries\n",
                 stats.prompts, stats.pairs_kept, stats.map_misses, stats.capped_responses, stats.retries);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic-aware label scoring and calibration metrics"};
    app.require_subcommand(1);

    KernelArgs ka;
    auto* kernel = app.add_subcommand("kernel", "build and cache the semantic kernel");
    add_inputs(kernel, ka.in);
    kernel->add_option("--tau", ka.tau, "similarity threshold")->check(CLI::Range(0.0, 0.999999));
    kernel->add_option("--threads", ka.threads)->check(CLI::PositiveNumber);
    kernel->add_option("--out", ka.out, "kernel cache file")->required();

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "score a dump and write metrics");
    add_inputs(eval, ea.in);
    eval->add_option("--dump", ea.dump, "line-delimited logit dump")->required()->check(CLI::ExistingFile);
    eval->add_option("--kernel", ea.kernel, "cached kernel (skips the rebuild)")->check(CLI::ExistingFile);
    eval->add_option("--k", ea.k, "candidate tokens per record")->check(CLI::PositiveNumber);
    eval->add_option("--tau", ea.tau, "similarity threshold")->check(CLI::Range(0.0, 0.999999));
    eval->add_option("--bins", ea.bins, "reliability bins")->check(CLI::PositiveNumber);
    eval->add_option("--method", ea.method)->check(CLI::IsMember({"standard", "semantic", "both"}));
    eval->add_option("--out-dir", ea.out_dir, "directory for reports");
    eval->add_flag("--audit", ea.audit, "write per-example distributions");
    eval->add_flag("--svg", ea.svg, "write a reliability diagram");
    eval->add_option("--threads", ea.threads)->check(CLI::PositiveNumber);

    SweepArgs sa;
    auto* sweep = app.add_subcommand("sweep", "semantic metrics over a (K, tau) grid");
    add_inputs(sweep, sa.in);
    sweep->add_option("--dump", sa.dump)->required()->check(CLI::ExistingFile);
    sweep->add_option("--k-values", sa.k_values, "override the K grid")->delimiter(',');
    sweep->add_option("--tau-values", sa.tau_values, "override the tau grid")->delimiter(',');
    sweep->add_option("--bins", sa.bins)->check(CLI::PositiveNumber);
    sweep->add_option("--out", sa.out, "CSV path (stdout if omitted)");
    sweep->add_option("--threads", sa.threads)->check(CLI::PositiveNumber);

    SynthArgs ya;
    auto* synth = app.add_subcommand("synth", "generate a synthetic embedding space and dump");
    auto& yc = ya.config;
    synth->add_option("--out-dir", ya.out_dir)->required();
    synth->add_option("--seed", yc.seed)->capture_default_str();
    synth->add_option("--n-labels", yc.n_labels)->capture_default_str();
    synth->add_option("--synonyms", yc.synonyms_per_label)->capture_default_str();
    synth->add_option("--distractors", yc.n_distractors)->capture_default_str();
    synth->add_option("--dim", yc.dim)->capture_default_str();
    synth->add_option("--rho", yc.synonym_cosine, "synonym cosine")->capture_default_str();
    synth->add_option("--leakage", yc.leakage, "synonym leakage")->capture_default_str();
    synth->add_option("--sigma", yc.noise_sigma, "logit noise")->capture_default_str();
    synth->add_option("--n", yc.n_examples, "records")->capture_default_str();
    synth->add_option("--alpha", yc.dirichlet_alpha, "Dirichlet concentration")->capture_default_str();
    synth->add_option("--bins", ya.bins)->check(CLI::PositiveNumber);
    synth->add_option("--tau", ya.tau, "threshold for the reference scores");

    FetchArgs fa;
    auto* fetch = app.add_subcommand("fetch", "collect sparse logprob dumps from a completions endpoint");
    fetch->add_option("--base-url", fa.endpoint.base_url)->required();
    fetch->add_option("--model", fa.endpoint.model)->required();
    fetch->add_option("--prompts", fa.prompts, "JSON-lines prompts")->required()->check(CLI::ExistingFile);
    fetch->add_option("--vocab-map", fa.vocab_map, "token<TAB>id manifest")->required()->check(CLI::ExistingFile);
    fetch->add_option("--out", fa.out)->required();
    fetch->add_option("--k", fa.k)->check(CLI::PositiveNumber);
    fetch->add_option("--cap", fa.endpoint.logprobs_cap, "server limit on top logprobs");
    fetch->add_option("--max-in-flight", fa.endpoint.max_in_flight)->check(CLI::PositiveNumber);
    fetch->add_option("--timeout", fa.timeout_ms, "request timeout in ms")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*kernel) return cmd_kernel(ka);
        if (*eval) return cmd_eval(ea, *eval);
        if (*sweep) return cmd_sweep(sa);
        if (*synth) return cmd_synth(ya);
        if (*fetch) return cmd_fetch(fa);
    } catch (const Error& e) {
        std::fprintf(stderr, "semx: %s\n", e.what());
        return exit_code(e.category());
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "semx: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "semx: %s\n", e.what());
        return 1;
    }
    return 0;
}
