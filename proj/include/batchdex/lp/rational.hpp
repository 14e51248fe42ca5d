#pragma once

#include <cstdint>
#include <compare>
#include <numeric>

#include "batchdex/core/errors.hpp"
#include "batchdex/core/wide.hpp"

namespace batchdex {

// Exact reduced rational over int128. Arithmetic overflow raises SolverStall
// so LP callers can fall back to the integral path.
struct Rat {
    int128_t num = 0;
    int128_t den = 1;

    Rat() = default;
    Rat(int64_t v) : num(v), den(1) {}
    static Rat from_i128(int128_t n, int128_t d = 1) {
        Rat r;
        r.num = n;
        r.den = d;
        r.normalize();
        return r;
    }
    static Rat from_u128(uint128_t v) {
        if (v >> 127) throw SolverStall("rational magnitude overflow");
        return from_i128(static_cast<int128_t>(v));
    }

    void normalize() {
        if (den == 0) throw SolverStall("rational zero denominator");
        if (den < 0) { num = -num; den = -den; }
        if (num == 0) { den = 1; return; }
        uint128_t a = num < 0 ? static_cast<uint128_t>(-num) : static_cast<uint128_t>(num);
        uint128_t b = static_cast<uint128_t>(den);
        while (b) { uint128_t t = a % b; a = b; b = t; }
        num /= static_cast<int128_t>(a);
        den /= static_cast<int128_t>(a);
    }

    bool is_zero() const { return num == 0; }
    int sign() const { return num < 0 ? -1 : (num > 0 ? 1 : 0); }

    static int128_t gcd_i128(int128_t a, int128_t b) {
        uint128_t x = a < 0 ? static_cast<uint128_t>(-a) : static_cast<uint128_t>(a);
        uint128_t y = b < 0 ? static_cast<uint128_t>(-b) : static_cast<uint128_t>(b);
        while (y) { uint128_t t = x % y; x = y; y = t; }
        return static_cast<int128_t>(x);
    }

    friend Rat operator+(const Rat& a, const Rat& b) {
        // cross-reduce by gcd(dens) so near-common denominators cannot
        // overflow the intermediate products
        int128_t g = gcd_i128(a.den, b.den);
        int128_t ad = a.den / g, bd = b.den / g;
        int128_t n1, n2, n, d;
        if (__builtin_mul_overflow(a.num, bd, &n1) || __builtin_mul_overflow(b.num, ad, &n2) ||
            __builtin_add_overflow(n1, n2, &n) || __builtin_mul_overflow(a.den, bd, &d))
            throw SolverStall("rational overflow in add");
        return from_i128(n, d);
    }
    friend Rat operator-(const Rat& a, const Rat& b) { return a + Rat::from_i128(-b.num, b.den); }
    friend Rat operator-(const Rat& a) { return from_i128(-a.num, a.den); }
    friend Rat operator*(const Rat& a, const Rat& b) {
        // cross-reduce first to keep magnitudes small
        Rat x = from_i128(a.num, b.den);
        Rat y = from_i128(b.num, a.den);
        int128_t n, d;
        if (__builtin_mul_overflow(x.num, y.num, &n) || __builtin_mul_overflow(x.den, y.den, &d))
            throw SolverStall("rational overflow in mul");
        return from_i128(n, d);
    }
    friend Rat operator/(const Rat& a, const Rat& b) {
        if (b.num == 0) throw SolverStall("rational division by zero");
        return a * from_i128(b.den, b.num);
    }

    friend bool operator==(const Rat& a, const Rat& b) { return a.num == b.num && a.den == b.den; }
    friend std::strong_ordering operator<=>(const Rat& a, const Rat& b) {
        if (a.sign() != b.sign()) return a.sign() <=> b.sign();
        int128_t g = gcd_i128(a.den, b.den);
        int128_t l, r;
        if (__builtin_mul_overflow(a.num, b.den / g, &l) || __builtin_mul_overflow(b.num, a.den / g, &r))
            throw SolverStall("rational overflow in compare");
        return l <=> r;
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

} // namespace batchdex
