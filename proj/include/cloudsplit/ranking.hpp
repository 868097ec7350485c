#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cloudsplit/error.hpp"

namespace cloudsplit::ranking {

// All four scores are "higher is better" and lie in [0, 1].
struct ProviderProfile {
    std::string id;
    double time = 0.0;
    double cost = 0.0;
    double security = 0.0;
    double privacy = 0.0;
    double p_auth_bypass = 0.0;
    std::vector<double> p_hier_access;  // index 0 is hierarchy depth 1
    double info_fraction = 1.0;

    void validate() const {
        auto unit = [this](double v, const char* what) {
            if (!(v >= 0.0 && v <= 1.0))
                fail(ErrorCode::InvalidArgument, "provider " + id + ": " + what + " outside [0, 1]");
        };
        unit(time, "time score");
        unit(cost, "cost score");
        unit(security, "security score");
        unit(privacy, "privacy score");
        unit(p_auth_bypass, "authentication bypass probability");
        unit(info_fraction, "information fraction");
        for (std::size_t i = 0; i < p_hier_access.size(); ++i) {
            unit(p_hier_access[i], "hierarchical access probability");
            if (i > 0 && p_hier_access[i] > p_hier_access[i - 1])
                fail(ErrorCode::InvalidArgument, "provider " + id + ": access probability rises with depth");
        }
    }
};

class Weights {
public:
    Weights() : Weights(make(0.25, 0.25, 0.25, 0.25)) {}

    static Weights make(double time, double cost, double security, double privacy) {
        for (double v : {time, cost, security, privacy})
            if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "weights must be finite and >= 0");
        const double sum = time + cost + security + privacy;
        if (sum <= 0.0) fail(ErrorCode::InvalidArgument, "weights must not all be zero");
        return Weights(time / sum, cost / sum, security / sum, privacy / sum);
    }

    double time() const { return a_[0]; }
    double cost() const { return a_[1]; }
    double security() const { return a_[2]; }
    double privacy() const { return a_[3]; }

private:
    Weights(double a, double b, double c, double d) : a_{a, b, c, d} {}
    double a_[4];
};

inline double rank_score(const ProviderProfile& p, const Weights& w) {
    return w.time() * p.time + w.cost() * p.cost + w.security() * p.security + w.privacy() * p.privacy;
}

// Descending score, ties broken by id.
inline std::vector<ProviderProfile> rank_providers(std::vector<ProviderProfile> profiles, const Weights& w) {
    if (profiles.empty()) fail(ErrorCode::NoProviders, "nothing to rank");
    std::vector<std::pair<double, ProviderProfile>> scored;
    for (auto& p : profiles) scored.emplace_back(rank_score(p, w), std::move(p));
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second.id < b.second.id;
    });
    std::vector<ProviderProfile> out;
    for (auto& [s, p] : scored) out.push_back(std::move(p));
    return out;
}

// Chance an attacker reads the object's data on this provider: get past the
// platform's authentication, reach the node's hierarchy level, and then
// hold only part of the information.
inline double breach_probability(const ProviderProfile& p, std::size_t depth) {
    if (depth < 1 || depth > p.p_hier_access.size())
        fail(ErrorCode::DepthOutOfRange, "provider " + p.id + " has no hierarchy level " + std::to_string(depth));
    return p.p_auth_bypass * p.p_hier_access[depth - 1] * p.info_fraction;
}

// Raw measurements as ingested: time and cost are "lower is better".
struct RawMetrics {
    std::string id;
    double time = 0.0;
    double cost = 0.0;
    double security = 0.0;
    double privacy = 0.0;
};

// Divides each metric by its maximum over the set, then inverts time and
// cost (score = 1 - normalized). Common positive scaling cancels out.
inline std::vector<ProviderProfile> normalize_metrics(const std::vector<RawMetrics>& raw,
                                                      bool privacy_from_security = false) {
    double max_t = 0, max_c = 0, max_s = 0, max_p = 0;
    for (const auto& r : raw) {
        for (double v : {r.time, r.cost, r.security, r.privacy})
            if (!(v >= 0.0) || !std::isfinite(v))
                fail(ErrorCode::InvalidArgument, "raw metrics for " + r.id + " must be finite and >= 0");
        max_t = std::max(max_t, r.time);
        max_c = std::max(max_c, r.cost);
        max_s = std::max(max_s, r.security);
        max_p = std::max(max_p, r.privacy);
    }
    auto norm = [](double v, double max) { return max > 0.0 ? v / max : 0.0; };
    std::vector<ProviderProfile> out;
    for (const auto& r : raw) {
        ProviderProfile p;
        p.id = r.id;
        p.time = 1.0 - norm(r.time, max_t);
        p.cost = 1.0 - norm(r.cost, max_c);
        p.security = norm(r.security, max_s);
        p.privacy = privacy_from_security ? p.security : norm(r.privacy, max_p);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace cloudsplit::ranking
