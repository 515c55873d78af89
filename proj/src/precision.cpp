#include "chaosbench/precision.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <system_error>

namespace chaosbench {

std::string_view to_string(Precision p) {
    switch (p) {
        case Precision::Single: return "single";
        case Precision::Double: return "double";
        case Precision::Extended: return "extended";
    }
    return "unknown";
}

Precision parse_precision(std::string_view text) {
    if (text == "single") return Precision::Single;
    if (text == "double") return Precision::Double;
    if (text == "extended") return Precision::Extended;
    throw std::invalid_argument("unknown precision '" + std::string(text) +
                                "' (expected single|double|extended)");
}

DDouble pow10(int exponent) {
    if (exponent < 0) return DDouble(1.0) / pow10(-exponent);
    DDouble result(1.0);
    DDouble base(10.0);
    while (exponent > 0) {
        if (exponent & 1) result *= base;
        exponent >>= 1;
        if (exponent > 0) base *= base;
    }
    return result;
}

namespace {

int floor_digit(DDouble y) {
    auto d = static_cast<int>(std::floor(y.hi()));
    if (y - DDouble(d) < DDouble(0.0)) --d;
    if (y - DDouble(d) >= DDouble(1.0)) ++d;
    return d;
}

template <class T>
std::string format_ieee(T x) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc{}) throw std::runtime_error("float formatting failed");
    return std::string(buf.data(), ptr);
}

template <class T>
T parse_ieee(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '+')) text.remove_prefix(1);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc::result_out_of_range) {
        // from_chars reports overflow/underflow without a value; strtod saturates.
        const std::string s(text);
        return static_cast<T>(std::strtod(s.c_str(), nullptr));
    }
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument("malformed number '" + std::string(text) + "'");
    return value;
}

}  // namespace

std::string to_string(DDouble value, int digits) {
    if (std::isnan(value.hi())) return "nan";
    if (std::isinf(value.hi())) return value.hi() < 0 ? "-inf" : "inf";
    if (value.hi() == 0.0) return std::signbit(value.hi()) ? "-0" : "0";

    std::string out;
    if (value.hi() < 0) {
        out.push_back('-');
        value = -value;
    }
    int exp10 = static_cast<int>(std::floor(std::log10(value.hi())));
    DDouble y = value / pow10(exp10);
    if (y >= DDouble(10.0)) {
        y /= DDouble(10.0);
        ++exp10;
    } else if (y < DDouble(1.0)) {
        y *= DDouble(10.0);
        --exp10;
    }

    std::string mantissa;
    for (int i = 0; i < digits; ++i) {
        const int d = std::clamp(floor_digit(y), 0, 9);
        mantissa.push_back(static_cast<char>('0' + d));
        y = (y - DDouble(d)) * DDouble(10.0);
    }
    if (floor_digit(y) >= 5) {
        int i = digits - 1;
        while (i >= 0 && mantissa[i] == '9') mantissa[i--] = '0';
        if (i >= 0) {
            ++mantissa[i];
        } else {
            mantissa.insert(mantissa.begin(), '1');
            mantissa.pop_back();
            ++exp10;
        }
    }
    out.push_back(mantissa[0]);
    if (digits > 1) {
        out.push_back('.');
        out.append(mantissa, 1);
    }
    out.push_back('e');
    out += std::to_string(exp10);
    return out;
}

DDouble parse_ddouble(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    const std::string_view original = text;
    auto fail = [&] { return std::invalid_argument("malformed number '" + std::string(original) + "'"); };

    bool negative = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    if (text == "inf" || text == "infinity") {
        const double inf = std::numeric_limits<double>::infinity();
        return DDouble(negative ? -inf : inf);
    }
    if (text == "nan") return DDouble(std::numeric_limits<double>::quiet_NaN());

    DDouble acc(0.0);
    int exp10 = 0;
    int significant = 0;
    bool any_digit = false;
    bool after_point = false;
    std::size_t i = 0;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '.') {
            if (after_point) throw fail();
            after_point = true;
            continue;
        }
        if (c < '0' || c > '9') break;
        any_digit = true;
        const int d = c - '0';
        if (significant == 0 && d == 0) {
            if (after_point) --exp10;
            continue;
        }
        if (significant < 40) {
            acc = acc * DDouble(10.0) + DDouble(d);
            ++significant;
            if (after_point) --exp10;
        } else if (!after_point) {
            ++exp10;
        }
    }
    if (!any_digit) throw fail();
    if (i < text.size()) {
        if (text[i] != 'e' && text[i] != 'E') throw fail();
        int e = 0;
        std::string_view rest = text.substr(i + 1);
        if (!rest.empty() && rest.front() == '+') rest.remove_prefix(1);
        auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), e);
        if (ec != std::errc{} || ptr != rest.data() + rest.size()) throw fail();
        exp10 += e;
    }
    DDouble result = exp10 >= 0 ? acc * pow10(exp10) : acc / pow10(-exp10);
    return negative ? -result : result;
}

std::string format_real(float x) { return format_ieee(x); }
std::string format_real(double x) { return format_ieee(x); }
std::string format_real(DDouble x) { return to_string(x, 36); }

template <>
float parse_real<float>(std::string_view text) {
    return parse_ieee<float>(text);
}
template <>
double parse_real<double>(std::string_view text) {
    return parse_ieee<double>(text);
}
template <>
DDouble parse_real<DDouble>(std::string_view text) {
    return parse_ddouble(text);
}

Scalar cast(const Scalar& x, Precision target) {
    return visit_precision(target, [&](auto tag) {
        using T = typename decltype(tag)::type;
        return Scalar(x.get<T>());
    });
}

Scalar epsilon(Precision p) {
    return visit_precision(p, [](auto tag) {
        using T = typename decltype(tag)::type;
        return Scalar(epsilon_of<T>());
    });
}

std::string format_scalar(const Scalar& x) {
    return std::visit([](auto v) { return format_real(v); }, x.value());
}

Scalar parse_scalar(std::string_view text, Precision p) {
    return visit_precision(p, [&](auto tag) {
        using T = typename decltype(tag)::type;
        return Scalar(parse_real<T>(text));
    });
}

}  // namespace chaosbench
