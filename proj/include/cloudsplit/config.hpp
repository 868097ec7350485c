#pragma once

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cloudsplit/error.hpp"
#include "cloudsplit/ranking.hpp"

// Policy files are line-oriented `key = value` text; `#` starts a comment.
// Repeated keys are kept in order (scenario steps rely on that).
namespace cloudsplit::config {

struct Entry {
    std::string key;
    std::string value;
    int line = 0;
};

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<Entry> parse_entries(std::string_view text) {
    std::vector<Entry> out;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const auto body = trim(raw);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ": expected key = value");
        auto key = trim(std::string_view(body).substr(0, eq));
        if (key.empty()) fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ": empty key");
        out.push_back({std::move(key), trim(std::string_view(body).substr(eq + 1)), line});
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ConfigError, what + ": '" + s + "' is not a number");
    }
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        fail(ErrorCode::ConfigError, what + ": '" + s + "' is not a non-negative integer");
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& what) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    fail(ErrorCode::ConfigError, what + ": '" + s + "' is not a boolean");
}

inline std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) out.push_back(parse_double(part, what));
    return out;
}

inline std::array<double, 4> parse_quad(const std::string& s, const std::string& what) {
    const auto v = parse_doubles(s, what);
    if (v.size() != 4) fail(ErrorCode::ConfigError, what + ": expected four comma-separated numbers");
    return {v[0], v[1], v[2], v[3]};
}

struct Policy {
    ranking::Weights weights;
    std::optional<std::uint32_t> k;
    std::optional<std::uint32_t> n;
    std::size_t max_chunks = 8;
    std::size_t granularity = 4096;
    std::size_t max_blocks = 512;
    std::size_t fixed_chunk_size = 0;  // nonzero selects FixedSize splitting
    std::uint32_t parity = 0;
    std::size_t audit_rounds = 16;
    std::size_t audit_blocks = 16;  // 0 challenges every row
    std::size_t he_bits = 128;
    bool privacy_from_security = false;
};

struct ProviderConfig {
    std::string id;
    std::vector<std::uint32_t> depths{1};
    std::optional<std::filesystem::path> store;
    std::string credential = "sim";
    std::optional<std::array<double, 4>> metrics;  // normalized scores
    std::optional<std::array<double, 4>> raw;      // raw time, cost, security, privacy
    double p_auth_bypass = 0.0;
    std::vector<double> p_hier_access;
    double info_fraction = 1.0;
};

struct Config {
    Policy policy;
    std::vector<ProviderConfig> providers;
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> keystore;
    std::vector<std::string> steps;
    std::string credential = "sim";  // presented by the router to every provider
    std::filesystem::path base_dir = ".";
};

inline ProviderConfig& provider_entry(Config& c, const std::string& id) {
    for (auto& p : c.providers)
        if (p.id == id) return p;
    c.providers.push_back(ProviderConfig{});
    c.providers.back().id = id;
    return c.providers.back();
}

inline Config parse_config(std::string_view text, const std::filesystem::path& base_dir = ".") {
    Config c;
    c.base_dir = base_dir;
    auto resolve = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base_dir / p;
    };
    auto u32 = [](const Entry& e) {
        const auto v = parse_uint(e.value, e.key);
        if (v > 0xffffffffu) fail(ErrorCode::ConfigError, e.key + " too large");
        return static_cast<std::uint32_t>(v);
    };
    for (const auto& e : parse_entries(text)) {
        const auto& k = e.key;
        if (k == "weights") {
            const auto w = parse_quad(e.value, k);
            c.policy.weights = ranking::Weights::make(w[0], w[1], w[2], w[3]);
        } else if (k == "k") {
            c.policy.k = u32(e);
        } else if (k == "n") {
            c.policy.n = u32(e);
        } else if (k == "chunks") {
            c.policy.max_chunks = parse_uint(e.value, k);
        } else if (k == "granularity") {
            c.policy.granularity = parse_uint(e.value, k);
        } else if (k == "max_blocks") {
            c.policy.max_blocks = parse_uint(e.value, k);
        } else if (k == "fixed_chunk_size") {
            c.policy.fixed_chunk_size = parse_uint(e.value, k);
        } else if (k == "parity") {
            c.policy.parity = u32(e);
        } else if (k == "audit_rounds") {
            c.policy.audit_rounds = parse_uint(e.value, k);
        } else if (k == "audit_blocks") {
            c.policy.audit_blocks = parse_uint(e.value, k);
        } else if (k == "he_bits") {
            c.policy.he_bits = parse_uint(e.value, k);
        } else if (k == "privacy_from_security") {
            c.policy.privacy_from_security = parse_bool(e.value, k);
        } else if (k == "manifest") {
            c.manifest = resolve(e.value);
        } else if (k == "keystore") {
            c.keystore = resolve(e.value);
        } else if (k == "credential") {
            c.credential = e.value;
        } else if (k == "step") {
            c.steps.push_back(e.value);
        } else if (k == "provider") {
            provider_entry(c, e.value);
        } else if (k.rfind("provider.", 0) == 0) {
            const auto rest = k.substr(9);
            const auto dot = rest.rfind('.');
            if (dot == std::string::npos || dot == 0)
                fail(ErrorCode::ConfigError, "line " + std::to_string(e.line) + ": expected provider.<id>.<field>");
            auto& p = provider_entry(c, rest.substr(0, dot));
            const auto field = rest.substr(dot + 1);
            if (field == "nodes") {
                p.depths.clear();
                for (const auto& d : split(e.value, ',')) {
                    const auto depth = parse_uint(d, k);
                    if (depth < 1) fail(ErrorCode::ConfigError, k + ": node depth must be >= 1");
                    p.depths.push_back(static_cast<std::uint32_t>(depth));
                }
            } else if (field == "store") {
                p.store = resolve(e.value);
            } else if (field == "credential") {
                p.credential = e.value;
            } else if (field == "metrics") {
                p.metrics = parse_quad(e.value, k);
            } else if (field == "raw") {
                p.raw = parse_quad(e.value, k);
            } else if (field == "breach") {
                // p_auth ; p_level1, p_level2, ... ; info_fraction
                const auto parts = split(e.value, ';');
                if (parts.size() != 3) fail(ErrorCode::ConfigError, k + ": expected 'p_auth ; levels ; fraction'");
                p.p_auth_bypass = parse_double(parts[0], k);
                p.p_hier_access = parse_doubles(parts[1], k);
                p.info_fraction = parse_double(parts[2], k);
            } else {
                fail(ErrorCode::ConfigError, "line " + std::to_string(e.line) + ": unknown provider field '" + field + "'");
            }
        } else {
            fail(ErrorCode::ConfigError, "line " + std::to_string(e.line) + ": unknown key '" + k + "'");
        }
    }
    return c;
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

// Profiles for ranking. Providers given raw metrics are normalized against
// each other; explicit scores are used as-is; otherwise all scores are 0.5.
inline std::vector<ranking::ProviderProfile> provider_profiles(const Config& c) {
    std::vector<ranking::RawMetrics> raw;
    for (const auto& p : c.providers)
        if (p.raw) raw.push_back({p.id, (*p.raw)[0], (*p.raw)[1], (*p.raw)[2], (*p.raw)[3]});
    const auto normalized = ranking::normalize_metrics(raw, c.policy.privacy_from_security);

    std::vector<ranking::ProviderProfile> out;
    for (const auto& p : c.providers) {
        ranking::ProviderProfile prof;
        prof.id = p.id;
        if (p.raw) {
            for (const auto& n : normalized)
                if (n.id == p.id) prof = n;
        } else {
            const auto m = p.metrics.value_or(std::array<double, 4>{0.5, 0.5, 0.5, 0.5});
            prof.time = m[0];
            prof.cost = m[1];
            prof.security = m[2];
            prof.privacy = c.policy.privacy_from_security ? m[2] : m[3];
        }
        prof.p_auth_bypass = p.p_auth_bypass;
        prof.info_fraction = p.info_fraction;
        prof.p_hier_access = p.p_hier_access;
        if (prof.p_hier_access.empty()) {
            std::uint32_t deepest = 1;
            for (auto d : p.depths) deepest = std::max(deepest, d);
            prof.p_hier_access.assign(deepest, 1.0);
        }
        prof.validate();
        out.push_back(std::move(prof));
    }
    return out;
}

}  // namespace cloudsplit::config
