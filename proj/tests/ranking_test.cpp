#include <gtest/gtest.h>

#include <algorithm>

#include "cloudsplit/crypto.hpp"
#include "cloudsplit/ranking.hpp"

using namespace cloudsplit;
using namespace cloudsplit::ranking;

namespace {

ProviderProfile profile(std::string id, double t, double c, double s, double p) {
    ProviderProfile out;
    out.id = std::move(id);
    out.time = t;
    out.cost = c;
    out.security = s;
    out.privacy = p;
    out.p_hier_access = {1.0};
    return out;
}

double unit(DeterministicRng& rng) { return static_cast<double>(rng.next_u64() >> 11) / 9007199254740992.0; }

std::vector<std::string> ids(const std::vector<ProviderProfile>& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(p.id);
    return out;
}

}  // namespace

TEST(Rank, SingleComponentWeight) {
    const auto p = profile("a", 0.1, 0.2, 0.73, 0.4);
    EXPECT_EQ(rank_score(p, Weights::make(0, 0, 1, 0)), 0.73);
}

TEST(Rank, ConstantMetricsGiveThatConstant) {
    const auto p = profile("a", 0.6, 0.6, 0.6, 0.6);
    EXPECT_NEAR(rank_score(p, Weights::make(1, 2, 3, 4)), 0.6, 1e-15);
}

TEST(Rank, WorkedExample) {
    const auto p = profile("a", 0.9, 0.5, 0.8, 0.6);
    EXPECT_NEAR(rank_score(p, Weights{}), 0.25 * 0.9 + 0.25 * 0.5 + 0.25 * 0.8 + 0.25 * 0.6, 1e-15);
    EXPECT_NEAR(rank_score(p, Weights{}), 0.7, 1e-12);
}

TEST(Rank, WeightsNormalized) {
    const auto w = Weights::make(2, 2, 4, 0);
    EXPECT_DOUBLE_EQ(w.time() + w.cost() + w.security() + w.privacy(), 1.0);
    EXPECT_DOUBLE_EQ(w.security(), 0.5);
    EXPECT_THROW(Weights::make(0, 0, 0, 0), Error);
    EXPECT_THROW(Weights::make(-1, 1, 1, 1), Error);
}

TEST(Rank, OrderingAndTies) {
    EXPECT_EQ(ids(rank_providers({profile("solo", 0, 0, 0, 0)}, Weights{})), std::vector<std::string>{"solo"});
    const auto lo = profile("lo", 0.5, 0.5, 0.2, 0.5), hi = profile("hi", 0.5, 0.5, 0.9, 0.5);
    EXPECT_EQ(ids(rank_providers({lo, hi}, Weights::make(0, 0, 1, 0))), (std::vector<std::string>{"hi", "lo"}));
    const auto b = profile("b", 0.5, 0.5, 0.5, 0.5), a = profile("a", 0.5, 0.5, 0.5, 0.5);
    EXPECT_EQ(ids(rank_providers({b, a}, Weights{})), (std::vector<std::string>{"a", "b"}));
    EXPECT_THROW(rank_providers({}, Weights{}), Error);
}

TEST(Rank, InputOrderNeverMatters) {
    DeterministicRng rng(1);
    std::vector<ProviderProfile> v;
    for (int i = 0; i < 12; ++i)
        v.push_back(profile("p" + std::to_string(i), unit(rng), unit(rng), std::round(unit(rng) * 4) / 4, unit(rng)));
    const auto w = Weights::make(0, 0, 1, 0);
    const auto expected = ids(rank_providers(v, w));
    for (int i = 0; i < 20; ++i) {
        for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[rng.uniform(k)]);
        EXPECT_EQ(ids(rank_providers(v, w)), expected);
    }
}

TEST(Rank, MonotoneAndBounded) {
    DeterministicRng rng(2);
    for (int i = 0; i < 500; ++i) {
        const auto w = Weights::make(unit(rng), unit(rng), unit(rng), unit(rng) + 0.01);
        auto p = profile("x", unit(rng), unit(rng), unit(rng), unit(rng));
        const double s = rank_score(p, w);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        p.security = std::min(1.0, p.security + 0.1);
        EXPECT_GE(rank_score(p, w), s);
    }
}

TEST(Rank, ScalingRawMetricsKeepsOrder) {
    DeterministicRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<RawMetrics> raw;
        for (int i = 0; i < 6; ++i)
            raw.push_back({"p" + std::to_string(i), 1 + 100 * unit(rng), 1 + 100 * unit(rng), 1 + 100 * unit(rng),
                           1 + 100 * unit(rng)});
        auto scaled = raw;
        const double factor = 0.01 + 50 * unit(rng);
        for (auto& r : scaled) {
            r.time *= factor;
            r.cost *= factor;
            r.security *= factor;
            r.privacy *= factor;
        }
        const auto w = Weights::make(unit(rng), unit(rng), unit(rng), unit(rng) + 0.01);
        EXPECT_EQ(ids(rank_providers(normalize_metrics(raw), w)), ids(rank_providers(normalize_metrics(scaled), w)));
    }
}

TEST(Normalize, LowerTimeAndCostScoreHigher) {
    const auto n = normalize_metrics({{"fast", 10, 5, 50, 20}, {"slow", 40, 10, 100, 10}}, true);
    EXPECT_DOUBLE_EQ(n[0].time, 0.75);
    EXPECT_DOUBLE_EQ(n[1].time, 0.0);
    EXPECT_DOUBLE_EQ(n[0].cost, 0.5);
    EXPECT_DOUBLE_EQ(n[0].security, 0.5);
    EXPECT_DOUBLE_EQ(n[0].privacy, n[0].security);
}

TEST(Breach, ThreeFactorProduct) {
    auto p = profile("x", 0, 0, 0, 0);
    p.p_auth_bypass = 0.1;
    p.p_hier_access = {0.5, 0.2};
    p.info_fraction = 0.25;
    EXPECT_DOUBLE_EQ(breach_probability(p, 1), 0.0125);
    EXPECT_EQ(breach_probability(p, 2), 0.1 * 0.2 * 0.25);
    EXPECT_LE(breach_probability(p, 2), breach_probability(p, 1));
    EXPECT_THROW(breach_probability(p, 0), Error);
    EXPECT_THROW(breach_probability(p, 3), Error);
    p.info_fraction = 0;
    EXPECT_EQ(breach_probability(p, 1), 0.0);
    p.p_auth_bypass = p.info_fraction = 1;
    p.p_hier_access = {1};
    EXPECT_EQ(breach_probability(p, 1), 1.0);
}

TEST(Profile, Validation) {
    auto p = profile("x", 0.5, 0.5, 0.5, 0.5);
    EXPECT_NO_THROW(p.validate());
    p.security = 1.5;
    EXPECT_THROW(p.validate(), Error);
    p.security = 0.5;
    p.p_hier_access = {0.2, 0.4};
    EXPECT_THROW(p.validate(), Error);
}
