#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "cloudsplit/error.hpp"

namespace cloudsplit {

// Ordered: TopSecret > Secret > Unclassified.
enum class SecretLevel : std::uint8_t { Unclassified = 0, Secret = 1, TopSecret = 2 };

enum class OperationClass : std::uint8_t { NoOperations = 0, BasicOperations = 1, AdvancedAnalytics = 2 };

enum class Pipeline : std::uint8_t {
    LocalOnly = 0,
    PlainSingleCloud = 1,
    SplitShareDisperse = 2,
    HomomorphicStore = 3,
    AnonymizedPartition = 4,
    Rejected = 5,
};

enum class ObjectKind : std::uint8_t { Binary = 0, Table = 1 };

inline std::string_view to_string(SecretLevel v) {
    switch (v) {
        case SecretLevel::Unclassified: return "unclassified";
        case SecretLevel::Secret: return "secret";
        case SecretLevel::TopSecret: return "top-secret";
    }
    return "?";
}

inline std::string_view to_string(OperationClass v) {
    switch (v) {
        case OperationClass::NoOperations: return "none";
        case OperationClass::BasicOperations: return "basic";
        case OperationClass::AdvancedAnalytics: return "advanced";
    }
    return "?";
}

inline std::string_view to_string(Pipeline v) {
    switch (v) {
        case Pipeline::LocalOnly: return "LocalOnly";
        case Pipeline::PlainSingleCloud: return "PlainSingleCloud";
        case Pipeline::SplitShareDisperse: return "SplitShareDisperse";
        case Pipeline::HomomorphicStore: return "HomomorphicStore";
        case Pipeline::AnonymizedPartition: return "AnonymizedPartition";
        case Pipeline::Rejected: return "Rejected";
    }
    return "?";
}

inline std::string_view to_string(ObjectKind v) { return v == ObjectKind::Binary ? "binary" : "table"; }

inline SecretLevel parse_level(std::string_view s) {
    if (s == "top-secret" || s == "topsecret") return SecretLevel::TopSecret;
    if (s == "secret") return SecretLevel::Secret;
    if (s == "unclassified") return SecretLevel::Unclassified;
    fail(ErrorCode::InvalidArgument, "unknown secret level '" + std::string(s) + "'");
}

inline OperationClass parse_ops(std::string_view s) {
    if (s == "none") return OperationClass::NoOperations;
    if (s == "basic") return OperationClass::BasicOperations;
    if (s == "advanced") return OperationClass::AdvancedAnalytics;
    fail(ErrorCode::InvalidArgument, "unknown operation class '" + std::string(s) + "'");
}

// How much a pipeline keeps away from providers; nothing leaves for
// LocalOnly and Rejected.
inline int confidentiality_rank(Pipeline p) {
    switch (p) {
        case Pipeline::LocalOnly:
        case Pipeline::Rejected: return 4;
        case Pipeline::SplitShareDisperse: return 3;
        case Pipeline::HomomorphicStore:
        case Pipeline::AnonymizedPartition: return 2;
        case Pipeline::PlainSingleCloud: return 1;
    }
    return 0;
}

}  // namespace cloudsplit
