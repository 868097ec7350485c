#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cloudsplit {

enum class ErrorCode {
    InvalidArgument,
    ZeroInverse,
    InvalidScheme,
    InsufficientShares,
    MixedScheme,
    DuplicatePoint,
    EmptyInput,
    InfeasibleSplit,
    NoNodes,
    InvalidShape,
    InvalidChallenge,
    RoundExhausted,
    OutOfRange,
    NoSuchChallenge,
    KeyMismatch,
    Unsupported,
    DuplicateIdentifier,
    DigestCollision,
    MissingGroup,
    UnknownDigest,
    NoProviders,
    DuplicateObject,
    NotFound,
    ReconstructionFailed,
    IntegrityViolation,
    DepthOutOfRange,
    Unavailable,
    UnknownBlob,
    UnknownTarget,
    Unauthorized,
    CorruptStore,
    MalformedData,
    ConfigError,
    IoError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ZeroInverse: return "ZeroInverse";
        case ErrorCode::InvalidScheme: return "InvalidScheme";
        case ErrorCode::InsufficientShares: return "InsufficientShares";
        case ErrorCode::MixedScheme: return "MixedScheme";
        case ErrorCode::DuplicatePoint: return "DuplicatePoint";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InfeasibleSplit: return "InfeasibleSplit";
        case ErrorCode::NoNodes: return "NoNodes";
        case ErrorCode::InvalidShape: return "InvalidShape";
        case ErrorCode::InvalidChallenge: return "InvalidChallenge";
        case ErrorCode::RoundExhausted: return "RoundExhausted";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::NoSuchChallenge: return "NoSuchChallenge";
        case ErrorCode::KeyMismatch: return "KeyMismatch";
        case ErrorCode::Unsupported: return "Unsupported";
        case ErrorCode::DuplicateIdentifier: return "DuplicateIdentifier";
        case ErrorCode::DigestCollision: return "DigestCollision";
        case ErrorCode::MissingGroup: return "MissingGroup";
        case ErrorCode::UnknownDigest: return "UnknownDigest";
        case ErrorCode::NoProviders: return "NoProviders";
        case ErrorCode::DuplicateObject: return "DuplicateObject";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::ReconstructionFailed: return "ReconstructionFailed";
        case ErrorCode::IntegrityViolation: return "IntegrityViolation";
        case ErrorCode::DepthOutOfRange: return "DepthOutOfRange";
        case ErrorCode::Unavailable: return "Unavailable";
        case ErrorCode::UnknownBlob: return "UnknownBlob";
        case ErrorCode::UnknownTarget: return "UnknownTarget";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::CorruptStore: return "CorruptStore";
        case ErrorCode::MalformedData: return "MalformedData";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

// All library failures are reported through this one exception type; the
// code is stable and is what the CLI prints.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace cloudsplit
