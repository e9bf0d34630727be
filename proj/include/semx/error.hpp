#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace semx {

enum class Errc {
    // record / type validation
    DimensionMismatch,
    DuplicateTokenId,
    UnsortedSparse,
    BadSoftLabel,
    TruthIndexOutOfRange,
    TokenOutOfRange,
    NonFiniteValue,
    // geometry / kernel
    ZeroNormRow,
    InvalidTau,
    IndexOutOfRange,
    // decoding
    MissingLabelLogit,
    KernelLabelMismatch,
    // metrics
    EmptyDataset,
    MissingTruth,
    DegenerateClasses,
    NotBinary,
    MissingSoftTruth,
    // synthetic generation
    DimTooSmall,
    DistractorRejectionExceeded,
    InvalidConfig,
    // files
    BadMagic,
    UnsupportedVersion,
    TruncatedFile,
    DuplicateName,
    EmptyLabelSet,
    MultiTokenLabel,
    MalformedLine,
    IoError,
    // remote endpoint
    AuthFailure,
    TokenMapMiss,
    PromptTooLong,
    RemoteError,
};

/// Coarse grouping used for process exit codes.
enum class ErrorCategory { Validation, Io, Remote };

constexpr std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DuplicateTokenId: return "DuplicateTokenId";
    case Errc::UnsortedSparse: return "UnsortedSparse";
    case Errc::BadSoftLabel: return "BadSoftLabel";
    case Errc::TruthIndexOutOfRange: return "TruthIndexOutOfRange";
    case Errc::TokenOutOfRange: return "TokenOutOfRange";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::ZeroNormRow: return "ZeroNormRow";
    case Errc::InvalidTau: return "InvalidTau";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::MissingLabelLogit: return "MissingLabelLogit";
    case Errc::KernelLabelMismatch: return "KernelLabelMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::MissingTruth: return "MissingTruth";
    case Errc::DegenerateClasses: return "DegenerateClasses";
    case Errc::NotBinary: return "NotBinary";
    case Errc::MissingSoftTruth: return "MissingSoftTruth";
    case Errc::DimTooSmall: return "DimTooSmall";
    case Errc::DistractorRejectionExceeded: return "DistractorRejectionExceeded";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::EmptyLabelSet: return "EmptyLabelSet";
    case Errc::MultiTokenLabel: return "MultiTokenLabel";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::IoError: return "IoError";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::TokenMapMiss: return "TokenMapMiss";
    case Errc::PromptTooLong: return "PromptTooLong";
    case Errc::RemoteError: return "RemoteError";
    }
    return "Unknown";
}

constexpr ErrorCategory errc_category(Errc code) noexcept {
    switch (code) {
    case Errc::BadMagic:
    case Errc::UnsupportedVersion:
    case Errc::TruncatedFile:
    case Errc::IoError:
        return ErrorCategory::Io;
    case Errc::AuthFailure:
    case Errc::TokenMapMiss:
    case Errc::PromptTooLong:
    case Errc::RemoteError:
        return ErrorCategory::Remote;
    default:
        return ErrorCategory::Validation;
    }
}

/// The single exception type thrown by the library. Carries a machine-readable
/// code and, for line-oriented formats, the 1-based line that failed.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), message_(message) {}

    Error(Errc code, const std::string& message, std::size_t line)
        : std::runtime_error(std::string(errc_name(code)) + " at line " + std::to_string(line) +
                             ": " + message),
          code_(code), message_(message), line_(line) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }
    [[nodiscard]] ErrorCategory category() const noexcept { return errc_category(code_); }
    [[nodiscard]] std::optional<std::size_t> line() const noexcept { return line_; }
    /// The message without the code prefix or line context.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    Errc code_;
    std::string message_;
    std::optional<std::size_t> line_;
};

} // namespace semx
