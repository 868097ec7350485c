#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/error.hpp"

namespace cloudsplit::field {

using Element = std::uint32_t;

enum class FieldKind : std::uint8_t { Binary = 1, Prime = 2 };

// x^8 + x^4 + x^3 + x^2 + 1; 0x02 generates the multiplicative group.
inline constexpr std::uint32_t kReductionPolynomial = 0x11d;

namespace detail {

constexpr Element carryless_mul8(Element a, Element b) {
    Element product = 0;
    for (int i = 0; i < 8; ++i) {
        if (b & 1u) product ^= a;
        b >>= 1;
        a <<= 1;
        if (a & 0x100u) a ^= kReductionPolynomial;
    }
    return product;
}

constexpr std::array<std::uint8_t, 256> make_inverse_table() {
    std::array<std::uint8_t, 256> table{};
    // a^254 = a^-1 in GF(2^8)*.
    for (Element a = 1; a < 256; ++a) {
        Element result = 1, base = a;
        for (unsigned e = 254; e != 0; e >>= 1) {
            if (e & 1u) result = carryless_mul8(result, base);
            base = carryless_mul8(base, base);
        }
        table[a] = static_cast<std::uint8_t>(result);
    }
    return table;
}

inline constexpr auto kInverse = make_inverse_table();

constexpr bool is_prime(std::uint32_t p) {
    if (p < 2) return false;
    for (std::uint32_t d = 2; d * d <= p; ++d)
        if (p % d == 0) return false;
    return true;
}

}  // namespace detail

class FieldSpec {
public:
    static FieldSpec binary8() { return FieldSpec(FieldKind::Binary, 256); }

    static FieldSpec prime(std::uint32_t p) {
        if (p >= (1u << 16)) fail(ErrorCode::InvalidArgument, "prime modulus must be < 2^16");
        if (!detail::is_prime(p)) fail(ErrorCode::InvalidArgument, std::to_string(p) + " is not prime");
        return FieldSpec(FieldKind::Prime, p);
    }

    FieldKind kind() const { return kind_; }
    std::uint32_t order() const { return order_; }
    bool is_binary() const { return kind_ == FieldKind::Binary; }
    bool contains(Element a) const { return a < order_; }

    // Serialized element width in bytes.
    std::size_t element_width() const { return order_ <= 256 ? 1 : 2; }

    Element add(Element a, Element b) const {
        if (is_binary()) return a ^ b;
        Element s = a + b;
        return s >= order_ ? s - order_ : s;
    }

    Element neg(Element a) const {
        if (is_binary() || a == 0) return a;
        return order_ - a;
    }

    Element sub(Element a, Element b) const { return add(a, neg(b)); }

    Element mul(Element a, Element b) const {
        if (is_binary()) return detail::carryless_mul8(a, b);
        return static_cast<Element>((std::uint64_t{a} * b) % order_);
    }

    Element pow(Element base, std::uint64_t exponent) const {
        Element result = 1;
        while (exponent != 0) {
            if (exponent & 1u) result = mul(result, base);
            base = mul(base, base);
            exponent >>= 1;
        }
        return result;
    }

    Element inv(Element a) const {
        if (a == 0) fail(ErrorCode::ZeroInverse, "zero has no multiplicative inverse");
        if (is_binary()) return detail::kInverse[a];
        return pow(a, order_ - 2);
    }

    Element div(Element a, Element b) const { return mul(a, inv(b)); }

    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;

    std::string describe() const {
        return is_binary() ? std::string("GF(2^8)") : "GF(" + std::to_string(order_) + ")";
    }

private:
    FieldSpec(FieldKind kind, std::uint32_t order) : kind_(kind), order_(order) {}

    FieldKind kind_;
    std::uint32_t order_;
};

// Field tag on the wire: kind byte, then u16 parameter (the prime, or the low
// 16 bits of the reduction polynomial).
inline void write_field(ByteWriter& w, const FieldSpec& f) {
    w.u8(static_cast<std::uint8_t>(f.kind()));
    w.u16(static_cast<std::uint16_t>(f.is_binary() ? kReductionPolynomial : f.order()));
}

inline FieldSpec read_field(ByteReader& r) {
    auto tag = r.u8();
    auto param = r.u16();
    if (tag == static_cast<std::uint8_t>(FieldKind::Binary)) {
        if (param != kReductionPolynomial) fail(ErrorCode::MalformedData, "unknown reduction polynomial");
        return FieldSpec::binary8();
    }
    if (tag == static_cast<std::uint8_t>(FieldKind::Prime)) {
        if (!detail::is_prime(param)) fail(ErrorCode::MalformedData, "field parameter is not prime");
        return FieldSpec::prime(param);
    }
    fail(ErrorCode::MalformedData, "unknown field tag");
}

inline void write_elements(ByteWriter& w, const FieldSpec& f, std::span<const Element> elems) {
    for (auto e : elems) {
        if (f.element_width() == 1) w.u8(static_cast<std::uint8_t>(e));
        else w.u16(static_cast<std::uint16_t>(e));
    }
}

inline std::vector<Element> read_elements(ByteReader& r, const FieldSpec& f, std::size_t count) {
    std::vector<Element> out(count);
    for (auto& e : out) {
        e = f.element_width() == 1 ? r.u8() : r.u16();
        if (!f.contains(e)) fail(ErrorCode::MalformedData, "element outside field");
    }
    return out;
}

inline Element add(Element a, Element b, const FieldSpec& f) { return f.add(a, b); }
inline Element mul(Element a, Element b, const FieldSpec& f) { return f.mul(a, b); }
inline Element inv(Element a, const FieldSpec& f) { return f.inv(a); }

}  // namespace cloudsplit::field
