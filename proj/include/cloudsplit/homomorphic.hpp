#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <gmpxx.h>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/error.hpp"

// Paillier encryption, additive subset only: ciphertexts live mod N^2 and
// E(m) = g^m r^N with g = N + 1, so products of ciphertexts decrypt to sums.
namespace cloudsplit::homomorphic {

inline constexpr std::size_t kMinimumBits = 16;
inline constexpr std::size_t kSecureBits = 2048;

using Fingerprint = std::array<std::uint8_t, 8>;

inline Bytes to_magnitude(const mpz_class& v) {
    if (v < 0) fail(ErrorCode::InvalidArgument, "negative magnitude");
    if (v == 0) return {};
    Bytes out((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8);
    std::size_t count = 0;
    mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
    out.resize(count);
    return out;
}

inline mpz_class from_magnitude(ByteView bytes) {
    mpz_class v;
    if (!bytes.empty()) mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
    return v;
}

struct PublicKey {
    mpz_class n;
    mpz_class n_squared;
    std::size_t bits = 0;
    Fingerprint fingerprint{};
};

struct PrivateKey {
    mpz_class lambda;
    mpz_class mu;
};

struct HomomorphicKeyPair {
    PublicKey pub;
    PrivateKey priv;

    bool insecure() const { return pub.bits < kSecureBits; }
};

struct Ciphertext {
    mpz_class value;
    Fingerprint key{};
};

inline PublicKey make_public(const mpz_class& n) {
    PublicKey pk;
    pk.n = n;
    pk.n_squared = n * n;
    pk.bits = mpz_sizeinbase(n.get_mpz_t(), 2);
    const auto d = sha256(to_magnitude(n));
    std::copy_n(d.begin(), pk.fingerprint.size(), pk.fingerprint.begin());
    return pk;
}

namespace detail {

template <WordSource Rng>
mpz_class random_bits(std::size_t bits, Rng& rng) {
    mpz_class v = 0;
    for (std::size_t done = 0; done < bits; done += 64) {
        v <<= 64;
        const std::uint64_t word = rng.next_u64();
        v += mpz_class(static_cast<unsigned long>(word >> 32)) * mpz_class(4294967296ul) +
             mpz_class(static_cast<unsigned long>(word & 0xffffffffu));
    }
    const std::size_t excess = ((bits + 63) / 64) * 64 - bits;
    v >>= excess;
    return v;
}

template <WordSource Rng>
mpz_class random_below(const mpz_class& bound, Rng& rng) {
    const std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
    for (;;) {
        mpz_class v = random_bits(bits, rng);
        if (v < bound) return v;
    }
}

// Prime with exactly `bits` bits and the top two bits set, so the product
// of two has exactly 2*bits bits.
template <WordSource Rng>
mpz_class random_prime(std::size_t bits, Rng& rng) {
    for (;;) {
        mpz_class candidate = random_bits(bits, rng);
        mpz_setbit(candidate.get_mpz_t(), bits - 1);
        mpz_setbit(candidate.get_mpz_t(), bits - 2);
        mpz_class p;
        mpz_nextprime(p.get_mpz_t(), candidate.get_mpz_t());
        if (mpz_sizeinbase(p.get_mpz_t(), 2) == bits) return p;
    }
}

}  // namespace detail

template <WordSource Rng>
HomomorphicKeyPair keygen(std::size_t bits, Rng& rng) {
    if (bits < kMinimumBits) fail(ErrorCode::InvalidArgument, "modulus must have at least 16 bits");
    const std::size_t half = bits / 2;
    for (;;) {
        const mpz_class p = detail::random_prime(half, rng);
        const mpz_class q = detail::random_prime(bits - half, rng);
        if (p == q) continue;
        const mpz_class n = p * q;
        const mpz_class phi = (p - 1) * (q - 1);
        mpz_class g;
        mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
        if (g != 1) continue;

        HomomorphicKeyPair kp;
        kp.pub = make_public(n);
        mpz_lcm(kp.priv.lambda.get_mpz_t(), mpz_class(p - 1).get_mpz_t(), mpz_class(q - 1).get_mpz_t());
        // With g = n + 1, L(g^lambda mod n^2) = lambda mod n.
        if (mpz_invert(kp.priv.mu.get_mpz_t(), kp.priv.lambda.get_mpz_t(), n.get_mpz_t()) == 0) continue;
        return kp;
    }
}

template <WordSource Rng>
Ciphertext encrypt(const PublicKey& pk, const mpz_class& plaintext, Rng& rng) {
    if (plaintext < 0 || plaintext >= pk.n) fail(ErrorCode::OutOfRange, "plaintext outside [0, N)");
    mpz_class r;
    for (;;) {
        r = detail::random_below(pk.n, rng);
        if (r == 0) continue;
        mpz_class g;
        mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
        if (g == 1) break;
    }
    mpz_class rn;
    mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t(), pk.n_squared.get_mpz_t());
    // (1 + N)^m = 1 + mN mod N^2
    mpz_class gm = (1 + plaintext * pk.n) % pk.n_squared;
    return {(gm * rn) % pk.n_squared, pk.fingerprint};
}

inline mpz_class decrypt(const HomomorphicKeyPair& kp, const Ciphertext& c) {
    if (c.key != kp.pub.fingerprint) fail(ErrorCode::KeyMismatch, "ciphertext was made under another key");
    mpz_class u;
    mpz_powm(u.get_mpz_t(), c.value.get_mpz_t(), kp.priv.lambda.get_mpz_t(), kp.pub.n_squared.get_mpz_t());
    const mpz_class l = (u - 1) / kp.pub.n;
    return (l * kp.priv.mu) % kp.pub.n;
}

inline void require_same_key(const Ciphertext& a, const Ciphertext& b) {
    if (a.key != b.key) fail(ErrorCode::KeyMismatch, "ciphertexts use different keys");
}

inline void require_key(const PublicKey& pk, const Ciphertext& c) {
    if (c.key != pk.fingerprint) fail(ErrorCode::KeyMismatch, "ciphertext does not belong to this key");
}

inline Ciphertext he_add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
    require_same_key(a, b);
    require_key(pk, a);
    return {(a.value * b.value) % pk.n_squared, pk.fingerprint};
}

inline Ciphertext he_sub(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
    require_same_key(a, b);
    require_key(pk, a);
    mpz_class inverse;
    if (mpz_invert(inverse.get_mpz_t(), b.value.get_mpz_t(), pk.n_squared.get_mpz_t()) == 0)
        fail(ErrorCode::MalformedData, "ciphertext not invertible mod N^2");
    return {(a.value * inverse) % pk.n_squared, pk.fingerprint};
}

inline Ciphertext he_scale(const PublicKey& pk, const Ciphertext& c, const mpz_class& scalar) {
    require_key(pk, c);
    if (scalar < 0 || scalar >= pk.n) fail(ErrorCode::OutOfRange, "scalar outside [0, N)");
    Ciphertext out{0, pk.fingerprint};
    mpz_powm(out.value.get_mpz_t(), c.value.get_mpz_t(), scalar.get_mpz_t(), pk.n_squared.get_mpz_t());
    return out;
}

// Ciphertext-side division has no additive counterpart.
[[noreturn]] inline void he_div(const PublicKey&, const Ciphertext&, const Ciphertext&) {
    fail(ErrorCode::Unsupported, "division is not supported by additive homomorphic encryption");
}

// Signed values map into [0, N): v >= 0 -> v, v < 0 -> N + v. Decoding
// treats residues above floor(N/2) as negative.
inline mpz_class encode_signed(const PublicKey& pk, std::int64_t v) {
    mpz_class m = static_cast<long>(v);
    const mpz_class half = pk.n / 2;
    if (m > half || -m > half) fail(ErrorCode::OutOfRange, "value does not fit the plaintext space");
    if (m < 0) m += pk.n;
    return m;
}

inline std::int64_t decode_signed(const PublicKey& pk, const mpz_class& m) {
    const mpz_class half = pk.n / 2;
    mpz_class v = m > half ? mpz_class(m - pk.n) : m;
    if (!v.fits_slong_p()) fail(ErrorCode::OutOfRange, "decoded value exceeds 64 bits");
    return static_cast<std::int64_t>(v.get_si());
}

// "CHE1" | fingerprint (8 bytes) | magnitude length u32 | big-endian magnitude
inline Bytes serialize(const Ciphertext& c) {
    ByteWriter w;
    w.magic("CHE1");
    w.raw(c.key);
    w.blob(to_magnitude(c.value));
    return std::move(w).take();
}

inline Ciphertext deserialize(ByteReader& r) {
    r.expect_magic("CHE1");
    Ciphertext c;
    auto fp = r.raw(c.key.size());
    std::copy(fp.begin(), fp.end(), c.key.begin());
    c.value = from_magnitude(r.blob());
    return c;
}

inline Ciphertext deserialize(ByteView data) {
    ByteReader r(data);
    auto c = deserialize(r);
    r.expect_done();
    return c;
}

// Local keystore form: N, lambda, mu as length-prefixed magnitudes.
inline Bytes serialize(const HomomorphicKeyPair& kp) {
    ByteWriter w;
    w.magic("CHK1");
    w.blob(to_magnitude(kp.pub.n));
    w.blob(to_magnitude(kp.priv.lambda));
    w.blob(to_magnitude(kp.priv.mu));
    return std::move(w).take();
}

inline HomomorphicKeyPair deserialize_keypair(ByteView data) {
    ByteReader r(data);
    r.expect_magic("CHK1");
    HomomorphicKeyPair kp;
    kp.pub = make_public(from_magnitude(r.blob()));
    kp.priv.lambda = from_magnitude(r.blob());
    kp.priv.mu = from_magnitude(r.blob());
    r.expect_done();
    return kp;
}

}  // namespace cloudsplit::homomorphic
