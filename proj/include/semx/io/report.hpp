#pragma once

// Report emitters: metrics / sweep / histogram CSV, reliability JSON lines,
// a per-example audit file and a minimal reliability-diagram SVG.
//
// CSV values are printed with 6 significant digits in the C locale; the audit
// file keeps full double precision.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "semx/io/pipeline.hpp"

namespace semx {

namespace detail {

inline std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string fmt6(const std::optional<double>& v) { return v ? fmt6(*v) : std::string("NA"); }

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    return out;
}

} // namespace detail

inline void write_metrics_csv(const EvalResult& result, std::ostream& out) {
    out << "method,K,tau,n_bins,ece,brier,auroc,macro_f1,n,fallback_count\n";
    for (const auto& m : result.methods) {
        const auto& r = m.report;
        out << method_name(m.method) << ',' << result.k << ',' << detail::fmt6(result.tau) << ',' << r.n_bins << ','
            << detail::fmt6(r.ece) << ',' << detail::fmt6(r.brier) << ',' << detail::fmt6(r.auroc) << ','
            << detail::fmt6(r.macro_f1) << ',' << r.n_examples << ',' << r.fallback_count << '\n';
    }
}

inline void write_reliability_jsonl(const EvalResult& result, std::ostream& out) {
    for (const auto& m : result.methods) {
        for (std::size_t b = 0; b < m.reliability.bins.size(); ++b) {
            const auto& bin = m.reliability.bins[b];
            nlohmann::ordered_json j;
            j["method"] = method_name(m.method);
            j["bin"] = b;
            j["lower"] = bin.lower;
            j["upper"] = bin.upper;
            j["count"] = bin.count;
            j["mean_confidence"] = bin.mean_confidence;
            j["accuracy"] = bin.accuracy;
            out << j.dump() << '\n';
        }
    }
}

inline void write_histogram_csv(const EvalResult& result, std::ostream& out) {
    out << "method,bin,lower,upper,count\n";
    for (const auto& m : result.methods) {
        for (std::size_t b = 0; b < m.histogram.size(); ++b) {
            const auto& h = m.histogram[b];
            out << method_name(m.method) << ',' << b << ',' << detail::fmt6(h.lower) << ',' << detail::fmt6(h.upper)
                << ',' << h.count << '\n';
        }
    }
}

/// One line per (example, method) with the full-precision distribution.
inline void write_audit_jsonl(const EvalResult& result, std::ostream& out) {
    for (const auto& m : result.methods) {
        for (const auto& r : m.records) {
            nlohmann::ordered_json j;
            j["example_id"] = r.distribution.example_id;
            j["method"] = method_name(r.distribution.method);
            j["probs"] = r.distribution.probs;
            if (const auto* hard = std::get_if<HardLabel>(&r.truth)) {
                j["truth"] = hard->index;
            } else {
                j["truth"] = std::get<SoftLabel>(r.truth).probs;
            }
            out << j.dump() << '\n';
        }
    }
}

/// Fixed 600x600 reliability diagram: unit square, y = x reference, one
/// polyline per method through the non-empty bins.
inline void write_reliability_svg(const EvalResult& result, std::ostream& out) {
    constexpr double size = 600.0;
    constexpr double margin = 60.0;
    constexpr double span = size - 2 * margin;
    static constexpr const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c"};
    auto px = [&](double x) { return detail::fmt6(margin + x * span); };
    auto py = [&](double y) { return detail::fmt6(size - margin - y * span); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"600\" height=\"600\" fill=\"white\"/>\n";
    out << "<rect x=\"" << px(0) << "\" y=\"" << py(1) << "\" width=\"" << span << "\" height=\"" << span
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
        << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    for (double t : {0.0, 0.5, 1.0}) {
        out << "<text x=\"" << px(t) << "\" y=\"" << detail::fmt6(size - margin + 20)
            << "\" font-size=\"12\" text-anchor=\"middle\">" << detail::fmt6(t) << "</text>\n";
        out << "<text x=\"" << detail::fmt6(margin - 10) << "\" y=\"" << py(t)
            << "\" font-size=\"12\" text-anchor=\"end\">" << detail::fmt6(t) << "</text>\n";
    }
    out << "<text x=\"300\" y=\"" << detail::fmt6(size - 15) << "\" font-size=\"14\" text-anchor=\"middle\">confidence</text>\n";
    out << "<text x=\"20\" y=\"300\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 300)\">accuracy</text>\n";

    for (std::size_t i = 0; i < result.methods.size(); ++i) {
        const auto& m = result.methods[i];
        const char* color = colors[i % 3];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& bin : m.reliability.bins) {
            if (bin.count == 0) continue;
            out << (first ? "" : " ") << px(bin.mean_confidence) << ',' << py(bin.accuracy);
            first = false;
        }
        out << "\"/>\n";
        out << "<text x=\"" << detail::fmt6(margin + 10) << "\" y=\"" << detail::fmt6(margin + 20 + 18.0 * i)
            << "\" font-size=\"13\" fill=\"" << color << "\">" << method_name(m.method) << "</text>\n";
    }
    out << "</svg>\n";
}

inline void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
    out << "K,tau,ece,brier,auroc,macro_f1,fallback_count\n";
    for (const auto& c : cells) {
        out << c.k << ',' << detail::fmt6(c.tau) << ',' << detail::fmt6(c.report.ece) << ','
            << detail::fmt6(c.report.brier) << ',' << detail::fmt6(c.report.auroc) << ','
            << detail::fmt6(c.report.macro_f1) << ',' << c.report.fallback_count << '\n';
    }
}

struct OutputOptions {
    bool svg = false;
    bool audit = false;
};

/// Writes metrics.csv, reliability.jsonl and confidence_histogram.csv (plus
/// reliability.svg and audit.jsonl on request) into `dir`. If any write
/// fails, files created by this call are removed before rethrowing.
inline std::vector<std::filesystem::path> write_eval_outputs(const EvalResult& result, const std::filesystem::path& dir,
                                                            OutputOptions opts = {}) {
    std::vector<std::filesystem::path> created;
    auto emit = [&](const char* name, auto&& writer) {
        const auto path = dir / name;
        auto out = detail::open_out(path);
        created.push_back(path);
        writer(result, out);
        out.flush();
        if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
    };
    try {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
        emit("metrics.csv", [](const EvalResult& r, std::ostream& o) { write_metrics_csv(r, o); });
        emit("reliability.jsonl", [](const EvalResult& r, std::ostream& o) { write_reliability_jsonl(r, o); });
        emit("confidence_histogram.csv", [](const EvalResult& r, std::ostream& o) { write_histogram_csv(r, o); });
        if (opts.svg) emit("reliability.svg", [](const EvalResult& r, std::ostream& o) { write_reliability_svg(r, o); });
        if (opts.audit) emit("audit.jsonl", [](const EvalResult& r, std::ostream& o) { write_audit_jsonl(r, o); });
    } catch (...) {
        for (const auto& p : created) {
            std::error_code ignored;
            std::filesystem::remove(p, ignored);
        }
        throw;
    }
    return created;
}

} // namespace semx
