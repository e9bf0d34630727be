#pragma once

// Binary embedding container, little-endian throughout:
//
//   offset  size            field
//   0       4               magic "SEMX"
//   4       4   u32         format version (1)
//   8       8   u64         vocab_size
//   16      8   u64         dim
//   24      4*vocab*dim f32 row-major values
//
// Row norms are not stored; they are recomputed on load.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "semx/core_types.hpp"
#include "semx/detail/binary_io.hpp"

namespace semx {

inline constexpr char kEmbeddingMagic[4] = {'S', 'E', 'M', 'X'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

inline void write_embeddings(const EmbeddingMatrix& E, std::ostream& out) {
    out.write(kEmbeddingMagic, 4);
    detail::put_le<std::uint32_t>(out, kEmbeddingVersion);
    detail::put_le<std::uint64_t>(out, E.vocab_size());
    detail::put_le<std::uint64_t>(out, E.dim());
    for (float v : E.data()) detail::put_f32(out, v);
    if (!out) throw Error(Errc::IoError, "failed writing embedding matrix");
}

inline EmbeddingMatrix read_embeddings(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4) throw Error(Errc::TruncatedFile, "file ends inside magic bytes");
    if (std::memcmp(magic, kEmbeddingMagic, 4) != 0) throw Error(Errc::BadMagic, "not an embedding container");
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != kEmbeddingVersion) {
        throw Error(Errc::UnsupportedVersion, "embedding container version " + std::to_string(version));
    }
    const auto vocab = detail::get_le<std::uint64_t>(in, "vocab_size");
    const auto dim = detail::get_le<std::uint64_t>(in, "dim");
    if (dim != 0 && vocab > std::numeric_limits<std::uint64_t>::max() / 4 / dim) {
        throw Error(Errc::TruncatedFile, "declared size overflows");
    }
    const std::uint64_t count = vocab * dim;
    if (const auto left = detail::remaining_bytes(in); left >= 0) {
        const auto need = count * 4;
        if (static_cast<std::uint64_t>(left) < need) {
            throw Error(Errc::TruncatedFile, "declared " + std::to_string(vocab) + "x" + std::to_string(dim) +
                                                 " matrix needs " + std::to_string(need) + " payload bytes, found " +
                                                 std::to_string(left));
        }
        if (static_cast<std::uint64_t>(left) > need) {
            throw Error(Errc::IoError, std::to_string(static_cast<std::uint64_t>(left) - need) +
                                           " trailing bytes after embedding payload");
        }
    }
    std::vector<float> data(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        data[i] = detail::get_f32(in, "embedding payload");
        if (!std::isfinite(data[i])) {
            throw Error(Errc::NonFiniteValue, "non-finite value in row " + std::to_string(i / dim));
        }
    }
    return EmbeddingMatrix(vocab, dim, std::move(data));
}

inline void write_embeddings(const EmbeddingMatrix& E, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    write_embeddings(E, out);
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return read_embeddings(in);
}

} // namespace semx
