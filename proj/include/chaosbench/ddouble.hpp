#pragma once

// Double-double arithmetic: a value is the unevaluated sum hi + lo of two
// doubles with |lo| <= ulp(hi) / 2, giving a 106-bit significand
// (about 31 significant decimal digits).
//
// The error-free transforms below assume round-to-nearest binary64 and no
// floating-point contraction; the build passes -ffp-contract=off.

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <string_view>

namespace chaosbench {

namespace detail {

inline double two_sum(double a, double b, double& err) {
    const double s = a + b;
    const double bb = s - a;
    err = (a - (s - bb)) + (b - bb);
    return s;
}

inline double quick_two_sum(double a, double b, double& err) {
    const double s = a + b;
    err = b - (s - a);
    return s;
}

// Veltkamp splitting into two 26-bit halves.
inline void split(double a, double& hi, double& lo) {
    constexpr double kSplitter = 134217729.0;  // 2^27 + 1
    const double t = kSplitter * a;
    hi = t - (t - a);
    lo = a - hi;
}

inline double two_prod(double a, double b, double& err) {
    const double p = a * b;
    double ah, al, bh, bl;
    split(a, ah, al);
    split(b, bh, bl);
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    return p;
}

}  // namespace detail

class DDouble {
public:
    constexpr DDouble() = default;
    constexpr DDouble(double x) : hi_(x), lo_(0.0) {}  // NOLINT: implicit widening is exact
    constexpr DDouble(int x) : hi_(x), lo_(0.0) {}     // NOLINT
    constexpr DDouble(float x) : hi_(x), lo_(0.0) {}   // NOLINT

    static DDouble from_parts(double hi, double lo) {
        double err;
        const double s = detail::quick_two_sum(hi, lo, err);
        return raw(s, err);
    }

    constexpr double hi() const { return hi_; }
    constexpr double lo() const { return lo_; }

    explicit operator double() const { return hi_ + lo_; }
    explicit operator float() const {
        // Round once from the full value: hi alone can sit on a float tie
        // that lo breaks.
        const auto f = static_cast<float>(hi_);
        const double rem = (hi_ - static_cast<double>(f)) + lo_;
        if (rem == 0.0) return f;
        const float toward = rem > 0 ? std::numeric_limits<float>::infinity()
                                     : -std::numeric_limits<float>::infinity();
        const float next = std::nextafter(f, toward);
        const double gap = std::abs(static_cast<double>(next) - static_cast<double>(f));
        const double half = 0.5 * gap;
        if (std::abs(rem) > half) return next;
        if (std::abs(rem) < half) return f;
        // Exact tie: keep the even significand.
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        return (bits & 1u) == 0 ? f : next;
    }

    friend DDouble operator-(DDouble a) { return raw(-a.hi_, -a.lo_); }

    friend DDouble operator+(DDouble a, DDouble b) {
        double e1, e2;
        double s = detail::two_sum(a.hi_, b.hi_, e1);
        const double t = detail::two_sum(a.lo_, b.lo_, e2);
        e1 += t;
        s = detail::quick_two_sum(s, e1, e1);
        e1 += e2;
        s = detail::quick_two_sum(s, e1, e1);
        return raw(s, e1);
    }
    friend DDouble operator-(DDouble a, DDouble b) { return a + (-b); }

    friend DDouble operator*(DDouble a, DDouble b) {
        double e;
        double p = detail::two_prod(a.hi_, b.hi_, e);
        e += a.hi_ * b.lo_ + a.lo_ * b.hi_;
        p = detail::quick_two_sum(p, e, e);
        return raw(p, e);
    }

    friend DDouble operator/(DDouble a, DDouble b) {
        // Three-term long division.
        const double q1 = a.hi_ / b.hi_;
        DDouble r = a - b * DDouble(q1);
        const double q2 = r.hi_ / b.hi_;
        r = r - b * DDouble(q2);
        const double q3 = r.hi_ / b.hi_;
        double e;
        const double q = detail::quick_two_sum(q1, q2, e);
        return raw(q, e) + DDouble(q3);
    }

    DDouble& operator+=(DDouble b) { return *this = *this + b; }
    DDouble& operator-=(DDouble b) { return *this = *this - b; }
    DDouble& operator*=(DDouble b) { return *this = *this * b; }
    DDouble& operator/=(DDouble b) { return *this = *this / b; }

    friend bool operator==(DDouble a, DDouble b) { return a.hi_ == b.hi_ && a.lo_ == b.lo_; }
    friend std::partial_ordering operator<=>(DDouble a, DDouble b) {
        if (auto c = a.hi_ <=> b.hi_; c != 0) return c;
        return a.lo_ <=> b.lo_;
    }

private:
    static constexpr DDouble raw(double hi, double lo) {
        DDouble d;
        d.hi_ = hi;
        d.lo_ = lo;
        return d;
    }

    double hi_ = 0.0;
    double lo_ = 0.0;
};

inline DDouble abs(DDouble a) { return a.hi() < 0 ? -a : a; }
inline bool isfinite(DDouble a) { return std::isfinite(a.hi()) && std::isfinite(a.lo()); }

// One Newton step on the double estimate doubles the correct bits.
inline DDouble sqrt(DDouble a) {
    if (a.hi() <= 0.0) return DDouble(std::sqrt(a.hi()));
    const double x = 1.0 / std::sqrt(a.hi());
    const double ax = a.hi() * x;
    const DDouble diff = a - DDouble(ax) * DDouble(ax);
    return DDouble(ax) + DDouble(diff.hi() * (x * 0.5));
}

DDouble pow10(int exponent);

/// Decimal text with `digits` significant digits in scientific notation.
std::string to_string(DDouble value, int digits = 36);

/// Parses a decimal literal (optional sign, fraction, exponent, inf/nan).
/// Throws std::invalid_argument on malformed input.
DDouble parse_ddouble(std::string_view text);

}  // namespace chaosbench

template <>
class std::numeric_limits<chaosbench::DDouble> {
public:
    static constexpr bool is_specialized = true;
    static constexpr int digits = 106;
    static constexpr int digits10 = 31;
    static constexpr int max_digits10 = 36;
    static constexpr bool is_signed = true;
    static constexpr bool is_exact = false;
    static constexpr bool has_infinity = true;
    static constexpr bool has_quiet_NaN = true;
    static constexpr chaosbench::DDouble epsilon() { return chaosbench::DDouble(0x1p-104); }
    static constexpr chaosbench::DDouble infinity() {
        return chaosbench::DDouble(std::numeric_limits<double>::infinity());
    }
    static constexpr chaosbench::DDouble quiet_NaN() {
        return chaosbench::DDouble(std::numeric_limits<double>::quiet_NaN());
    }
    static constexpr chaosbench::DDouble max() { return chaosbench::DDouble(std::numeric_limits<double>::max()); }
    static constexpr chaosbench::DDouble lowest() {
        return chaosbench::DDouble(std::numeric_limits<double>::lowest());
    }
};
