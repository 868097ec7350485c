#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/field.hpp"

// (k, n) threshold sharing: every secret byte D gets its own polynomial
// q(x) = D + a1 x + ... + a(k-1) x^(k-1), and share i carries q(i).
namespace cloudsplit::shamir {

using field::Element;
using field::FieldSpec;

struct ShareScheme {
    std::uint32_t k = 1;
    std::uint32_t n = 1;
    FieldSpec field = FieldSpec::binary8();

    void validate() const {
        if (k < 1) fail(ErrorCode::InvalidScheme, "threshold k must be at least 1");
        if (k > n)
            fail(ErrorCode::InvalidScheme, "threshold k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
        if (n >= field.order())
            fail(ErrorCode::InvalidScheme, "n=" + std::to_string(n) + " needs distinct nonzero points in " +
                                               field.describe());
    }

    friend bool operator==(const ShareScheme&, const ShareScheme&) = default;
};

struct Share {
    Element x = 0;
    std::vector<Element> payload;
    ShareScheme scheme;
    std::string object_id;

    friend bool operator==(const Share&, const Share&) = default;
};

// Shares that an attacker holding this many can lose without the owner losing data.
inline std::uint32_t corruption_tolerance(const ShareScheme& scheme) {
    scheme.validate();
    return scheme.n - scheme.k;
}

template <UniformSource Rng>
std::vector<Share> split(const std::string& object_id, ByteView secret, const ShareScheme& scheme, Rng& rng) {
    scheme.validate();
    if (secret.empty()) fail(ErrorCode::EmptyInput, "secret is empty");
    const FieldSpec& f = scheme.field;

    std::vector<Share> shares(scheme.n);
    for (std::uint32_t i = 0; i < scheme.n; ++i) {
        shares[i].x = i + 1;
        shares[i].payload.resize(secret.size());
        shares[i].scheme = scheme;
        shares[i].object_id = object_id;
    }

    std::vector<Element> coeffs(scheme.k);
    for (std::size_t pos = 0; pos < secret.size(); ++pos) {
        if (!f.contains(secret[pos]))
            fail(ErrorCode::OutOfRange, "secret byte " + std::to_string(secret[pos]) + " outside " + f.describe());
        coeffs[0] = secret[pos];
        for (std::uint32_t j = 1; j < scheme.k; ++j) coeffs[j] = static_cast<Element>(rng.uniform(f.order()));
        for (auto& share : shares) {
            // Horner
            Element acc = 0;
            for (std::size_t j = coeffs.size(); j-- > 0;) acc = f.add(f.mul(acc, share.x), coeffs[j]);
            share.payload[pos] = acc;
        }
    }
    return shares;
}

// Lagrange basis weights at x = 0 for the given points.
inline std::vector<Element> lagrange_weights_at_zero(const std::vector<Element>& xs, const FieldSpec& f) {
    std::vector<Element> weights(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Element num = 1, den = 1;
        for (std::size_t j = 0; j < xs.size(); ++j) {
            if (i == j) continue;
            num = f.mul(num, xs[j]);
            den = f.mul(den, f.sub(xs[j], xs[i]));
        }
        weights[i] = f.div(num, den);
    }
    return weights;
}

inline Bytes reconstruct(std::span<const Share> shares) {
    if (shares.empty()) fail(ErrorCode::InsufficientShares, "no shares supplied");
    const Share& first = shares.front();
    const ShareScheme& scheme = first.scheme;
    scheme.validate();

    std::set<Element> seen;
    for (const auto& s : shares) {
        if (!(s.scheme == scheme)) fail(ErrorCode::MixedScheme, "shares come from different schemes");
        if (s.object_id != first.object_id) fail(ErrorCode::MixedScheme, "shares belong to different objects");
        if (s.payload.size() != first.payload.size()) fail(ErrorCode::MixedScheme, "share payload lengths differ");
        if (s.x == 0 || s.x > scheme.n) fail(ErrorCode::OutOfRange, "evaluation point outside 1..n");
        if (!seen.insert(s.x).second) fail(ErrorCode::DuplicatePoint, "point x=" + std::to_string(s.x) + " repeated");
    }
    if (shares.size() < scheme.k)
        fail(ErrorCode::InsufficientShares,
             "have " + std::to_string(shares.size()) + " shares, need " + std::to_string(scheme.k));

    const FieldSpec& f = scheme.field;
    std::vector<const Share*> used;
    for (std::size_t i = 0; i < scheme.k; ++i) used.push_back(&shares[i]);
    std::vector<Element> xs;
    for (auto* s : used) xs.push_back(s->x);
    auto weights = lagrange_weights_at_zero(xs, f);

    Bytes secret(first.payload.size());
    for (std::size_t pos = 0; pos < secret.size(); ++pos) {
        Element acc = 0;
        for (std::size_t i = 0; i < used.size(); ++i) acc = f.add(acc, f.mul(weights[i], used[i]->payload[pos]));
        if (acc > 0xff) fail(ErrorCode::MalformedData, "reconstructed value does not fit a byte");
        secret[pos] = static_cast<std::uint8_t>(acc);
    }
    return secret;
}

// Wire format, little-endian:
//   "CSH1" | k u16 | n u16 | field tag (u8 kind, u16 param) | x u16 |
//   object_id (u32 length + bytes) | payload elements to end of buffer
inline Bytes serialize(const Share& share) {
    ByteWriter w;
    w.magic("CSH1");
    w.u16(static_cast<std::uint16_t>(share.scheme.k));
    w.u16(static_cast<std::uint16_t>(share.scheme.n));
    field::write_field(w, share.scheme.field);
    w.u16(static_cast<std::uint16_t>(share.x));
    w.str(share.object_id);
    field::write_elements(w, share.scheme.field, share.payload);
    return std::move(w).take();
}

inline bool looks_like_share(ByteView data) {
    return data.size() >= 4 && std::equal(data.begin(), data.begin() + 4, "CSH1");
}

inline Share deserialize(ByteView data) {
    ByteReader r(data);
    r.expect_magic("CSH1");
    Share s;
    s.scheme.k = r.u16();
    s.scheme.n = r.u16();
    s.scheme.field = field::read_field(r);
    s.x = r.u16();
    s.object_id = r.str();
    const auto width = s.scheme.field.element_width();
    if (r.remaining() % width != 0) fail(ErrorCode::MalformedData, "payload not a whole number of elements");
    s.payload = field::read_elements(r, s.scheme.field, r.remaining() / width);
    return s;
}

}  // namespace cloudsplit::shamir
