#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/error.hpp"

namespace cloudsplit {

using Digest32 = std::array<std::uint8_t, 32>;

inline Digest32 sha256(ByteView data) {
    Digest32 out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
        fail(ErrorCode::InvalidArgument, "sha256 failed");
    return out;
}

inline Digest32 hmac_sha256(ByteView key, ByteView message) {
    Digest32 out{};
    unsigned int len = 0;
    // OpenSSL rejects a null key pointer even for zero length.
    static const std::uint8_t empty = 0;
    const void* key_ptr = key.empty() ? &empty : key.data();
    if (HMAC(EVP_sha256(), key_ptr, static_cast<int>(key.size()), message.data(), message.size(),
             out.data(), &len) == nullptr ||
        len != 32)
        fail(ErrorCode::InvalidArgument, "hmac-sha256 failed");
    return out;
}

// Source of uniform integers below a bound; what the sharing and planning
// code consumes. Tests plug in scripted sources to pin coefficients.
template <class G>
concept UniformSource = requires(G g, std::uint64_t bound) {
    { g.uniform(bound) } -> std::convertible_to<std::uint64_t>;
};

template <class G>
concept WordSource = UniformSource<G> && requires(G g) {
    { g.next_u64() } -> std::convertible_to<std::uint64_t>;
};

// Counter-mode keyed generator. Block i of the stream is
//     HMAC-SHA256(key, label || u64le(i)),   i = 0, 1, 2, ...
// and bytes are consumed in order. next_u64() reads 8 bytes little-endian;
// uniform(b) draws next_u64() values x until x >= (2^64 mod b) and returns
// x mod b. Any implementation following this schedule reproduces the same
// draws from the same (key, label).
class DeterministicRng {
public:
    using result_type = std::uint64_t;

    DeterministicRng(ByteView key, std::string_view label)
        : key_(key.begin(), key.end()), label_(label.begin(), label.end()) {}

    explicit DeterministicRng(std::uint64_t seed) : label_(to_bytes("cloudsplit.seed")) {
        ByteWriter w;
        w.u64(seed);
        key_ = std::move(w).take();
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }

    std::uint8_t next_byte() {
        if (offset_ == block_.size()) refill();
        return block_[offset_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{next_byte()} << (8 * i);
        return v;
    }

    std::uint64_t uniform(std::uint64_t bound) {
        if (bound == 0) fail(ErrorCode::InvalidArgument, "uniform bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t x = next_u64();
            if (x >= threshold) return x % bound;
        }
    }

    void fill(std::span<std::uint8_t> out) {
        for (auto& b : out) b = next_byte();
    }

private:
    void refill() {
        ByteWriter msg;
        msg.raw(label_);
        msg.u64(counter_++);
        block_ = hmac_sha256(key_, msg.bytes());
        offset_ = 0;
    }

    Bytes key_;
    Bytes label_;
    std::uint64_t counter_ = 0;
    Digest32 block_{};
    std::size_t offset_ = block_.size();
};

// Fresh key material for production use; tests derive keys from seeds.
inline Bytes random_key(std::size_t size = 32) {
    std::random_device rd;
    Bytes out(size);
    for (auto& b : out) b = static_cast<std::uint8_t>(rd());
    return out;
}

inline Bytes derive_key(ByteView master, std::string_view purpose) {
    auto d = hmac_sha256(master, as_bytes(purpose));
    return Bytes(d.begin(), d.end());
}

}  // namespace cloudsplit
