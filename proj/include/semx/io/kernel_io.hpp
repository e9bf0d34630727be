#pragma once

// Kernel cache, little-endian:
//   "SEMK" | u32 version (1) | f64 tau | u64 vocab_size | u64 n_labels
//   then per label: u32 label token | u64 entry count | count x (u32 token, f64 weight)

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "semx/core_types.hpp"
#include "semx/detail/binary_io.hpp"

namespace semx {

inline constexpr char kKernelMagic[4] = {'S', 'E', 'M', 'K'};
inline constexpr std::uint32_t kKernelVersion = 1;

inline void write_kernel(const SemanticKernel& kernel, std::ostream& out) {
    out.write(kKernelMagic, 4);
    detail::put_le<std::uint32_t>(out, kKernelVersion);
    detail::put_f64(out, kernel.tau());
    detail::put_le<std::uint64_t>(out, kernel.vocab_size());
    detail::put_le<std::uint64_t>(out, kernel.n_labels());
    for (std::size_t l = 0; l < kernel.n_labels(); ++l) {
        const auto& row = kernel.rows()[l];
        detail::put_le<std::uint32_t>(out, kernel.label_tokens()[l]);
        detail::put_le<std::uint64_t>(out, row.size());
        for (const auto& e : row) {
            detail::put_le<std::uint32_t>(out, e.token_id);
            detail::put_f64(out, e.weight);
        }
    }
    if (!out) throw Error(Errc::IoError, "failed writing kernel cache");
}

inline SemanticKernel read_kernel(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4) throw Error(Errc::TruncatedFile, "file ends inside magic bytes");
    if (std::memcmp(magic, kKernelMagic, 4) != 0) throw Error(Errc::BadMagic, "not a kernel cache");
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != kKernelVersion) throw Error(Errc::UnsupportedVersion, "kernel cache version " + std::to_string(version));
    const double tau = detail::get_f64(in, "tau");
    const auto vocab = detail::get_le<std::uint64_t>(in, "vocab_size");
    const auto n = detail::get_le<std::uint64_t>(in, "n_labels");
    if (n > vocab) throw Error(Errc::KernelLabelMismatch, "more labels than vocabulary entries");

    std::vector<TokenId> tokens;
    std::vector<KernelRow> rows;
    for (std::uint64_t l = 0; l < n; ++l) {
        tokens.push_back(detail::get_le<std::uint32_t>(in, "label token"));
        const auto count = detail::get_le<std::uint64_t>(in, "row size");
        if (count > vocab) throw Error(Errc::TruncatedFile, "row size exceeds vocabulary");
        KernelRow row;
        row.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto token = detail::get_le<std::uint32_t>(in, "row entry");
            row.push_back({token, detail::get_f64(in, "row entry")});
        }
        rows.push_back(std::move(row));
    }
    return SemanticKernel(tau, vocab, std::move(tokens), std::move(rows));
}

inline void write_kernel(const SemanticKernel& kernel, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    write_kernel(kernel, out);
}

inline SemanticKernel read_kernel(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return read_kernel(in);
}

} // namespace semx
