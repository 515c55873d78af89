#pragma once

// Floating-point precision tags and the scalar types behind them.
//
//   Single   -> float    (IEEE binary32, unit roundoff 2^-24)
//   Double   -> double   (IEEE binary64, unit roundoff 2^-53)
//   Extended -> DDouble  (double-double, 106-bit significand, eps 2^-104)
//
// Numeric code is templated on the scalar type; the runtime tag only
// selects an instantiation at the boundaries (CLI, files, sweeps).

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>

#include "chaosbench/ddouble.hpp"

namespace chaosbench {

enum class Precision { Single = 0, Double = 1, Extended = 2 };

// Ordered by significand width.
constexpr bool operator<(Precision a, Precision b) {
    return static_cast<int>(a) < static_cast<int>(b);
}

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

template <class T>
concept Real = std::same_as<T, float> || std::same_as<T, double> || std::same_as<T, DDouble>;

// Precisions that networks can run at.
template <class T>
concept NetReal = std::same_as<T, float> || std::same_as<T, double>;

template <class T>
struct precision_of;
template <>
struct precision_of<float> : std::integral_constant<Precision, Precision::Single> {};
template <>
struct precision_of<double> : std::integral_constant<Precision, Precision::Double> {};
template <>
struct precision_of<DDouble> : std::integral_constant<Precision, Precision::Extended> {};

template <class T>
inline constexpr Precision precision_v = precision_of<T>::value;

template <Precision P>
struct scalar_for;
template <>
struct scalar_for<Precision::Single> { using type = float; };
template <>
struct scalar_for<Precision::Double> { using type = double; };
template <>
struct scalar_for<Precision::Extended> { using type = DDouble; };

template <Precision P>
using scalar_t = typename scalar_for<P>::type;

/// Calls f(std::type_identity<T>{}) with the scalar type for p.
template <class F>
decltype(auto) visit_precision(Precision p, F&& f) {
    switch (p) {
        case Precision::Single: return std::forward<F>(f)(std::type_identity<float>{});
        case Precision::Double: return std::forward<F>(f)(std::type_identity<double>{});
        case Precision::Extended: return std::forward<F>(f)(std::type_identity<DDouble>{});
    }
    throw std::invalid_argument("unknown precision");
}

/// Same as visit_precision but restricted to network precisions.
template <class F>
decltype(auto) visit_net_precision(Precision p, F&& f) {
    switch (p) {
        case Precision::Single: return std::forward<F>(f)(std::type_identity<float>{});
        case Precision::Double: return std::forward<F>(f)(std::type_identity<double>{});
        case Precision::Extended: break;
    }
    throw std::invalid_argument("networks run at single or double precision only");
}

// Correctly rounded conversion between the three scalar types.
template <Real To, Real From>
To precision_cast(From x) {
    if constexpr (std::is_same_v<To, From>) {
        return x;
    } else if constexpr (std::is_same_v<From, DDouble>) {
        return static_cast<To>(x);
    } else if constexpr (std::is_same_v<To, DDouble>) {
        return DDouble(static_cast<double>(x));
    } else {
        return static_cast<To>(x);
    }
}

template <Real T>
double to_double(T x) {
    return precision_cast<double>(x);
}

template <Real T>
T from_double(double x) {
    return precision_cast<T>(x);
}

/// Exact ratio p/q rounded to T (e.g. beta = 8/3 at the working precision).
template <Real T>
T rational(int p, int q) {
    return T(p) / T(q);
}

template <Real T>
T epsilon_of() {
    return std::numeric_limits<T>::epsilon();
}

// Elementary functions used by the numeric code, one overload set per type so
// float stays in float.
inline float tanh_r(float x) { return std::tanh(x); }
inline double tanh_r(double x) { return std::tanh(x); }
inline float exp_r(float x) { return std::exp(x); }
inline double exp_r(double x) { return std::exp(x); }
inline float sqrt_r(float x) { return std::sqrt(x); }
inline double sqrt_r(double x) { return std::sqrt(x); }
inline DDouble sqrt_r(DDouble x) { return sqrt(x); }
inline bool finite_r(float x) { return std::isfinite(x); }
inline bool finite_r(double x) { return std::isfinite(x); }
inline bool finite_r(DDouble x) { return isfinite(x); }

/// Shortest decimal that round-trips (at most 9 / 17 significant digits);
/// DDouble values are written with 36 significant digits.
std::string format_real(float x);
std::string format_real(double x);
std::string format_real(DDouble x);

template <Real T>
T parse_real(std::string_view text);

/// The decimal that prints as `x`, rounded at T (0.02 becomes the nearest
/// float, double or double-double to 2/100).
template <Real T>
T from_decimal(double x) {
    return parse_real<T>(format_real(x));
}

/// A value tagged with its precision.
class Scalar {
public:
    Scalar() = default;
    explicit Scalar(float v) : value_(v) {}
    explicit Scalar(double v) : value_(v) {}
    explicit Scalar(DDouble v) : value_(v) {}

    Precision precision() const { return static_cast<Precision>(value_.index()); }

    template <Real T>
    T get() const {
        return std::visit([](auto v) { return precision_cast<T>(v); }, value_);
    }

    double to_double() const { return get<double>(); }

    const std::variant<float, double, DDouble>& value() const { return value_; }

    friend bool operator==(const Scalar&, const Scalar&) = default;

private:
    std::variant<float, double, DDouble> value_{0.0};
};

Scalar cast(const Scalar& x, Precision target);
Scalar epsilon(Precision p);
std::string format_scalar(const Scalar& x);
Scalar parse_scalar(std::string_view text, Precision p);

}  // namespace chaosbench
