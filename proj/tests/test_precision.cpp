#include <cmath>
#include <limits>

#include "doctest.h"

#include "chaosbench/precision.hpp"

using namespace chaosbench;

TEST_CASE("cast to single rounds to the nearest binary32") {
    const Scalar tenth(0.1);
    const Scalar s = cast(tenth, Precision::Single);
    CHECK(s.precision() == Precision::Single);
    CHECK(s.to_double() == 0.100000001490116119384765625);
    CHECK(std::abs(s.to_double() - 0.1) == doctest::Approx(1.490116e-9).epsilon(1e-5));

    CHECK(cast(Scalar(1.0), Precision::Single).to_double() == 1.0);
}

TEST_CASE("pi rounded through single differs by the binary32 rounding error") {
    const DDouble pi = parse_real<DDouble>("3.14159265358979323846264338327950288");
    const Scalar back = cast(cast(Scalar(pi), Precision::Single), Precision::Extended);
    const DDouble diff = back.get<DDouble>() - pi;
    // float(pi) = 13176795 / 2^22 = 3.1415927410125732421875
    CHECK(to_double(diff) == doctest::Approx(8.742278000372485e-8).epsilon(1e-12));
}

TEST_CASE("machine epsilon per precision") {
    CHECK(epsilon(Precision::Single).to_double() == std::ldexp(1.0, -23));
    CHECK(epsilon(Precision::Double).to_double() == std::ldexp(1.0, -52));
    CHECK(epsilon(Precision::Extended).to_double() <= 1e-29);
}

TEST_CASE("double-double keeps bits below double resolution") {
    const DDouble tiny = std::ldexp(1.0, -80);
    const DDouble one_plus = DDouble(1.0) + tiny;
    CHECK(to_double(one_plus - DDouble(1.0)) == std::ldexp(1.0, -80));

    const DDouble third = DDouble(1) / DDouble(3);
    CHECK(std::abs(to_double(third * DDouble(3) - DDouble(1))) < 1e-31);

    const DDouble r2 = sqrt(DDouble(2));
    CHECK(std::abs(to_double(r2 * r2 - DDouble(2))) < 1e-30);

    const DDouble tenth = from_decimal<DDouble>(0.1);
    CHECK(std::abs(to_double(tenth * DDouble(10) - DDouble(1))) < 1e-31);
}

TEST_CASE("decimal text round trips") {
    for (double x : {0.1, -1.154, 3.352e-300, 123456789.125}) CHECK(parse_real<double>(format_real(x)) == x);
    for (float x : {0.1f, -1.154f, 1e-30f}) CHECK(parse_real<float>(format_real(x)) == x);

    const DDouble pi = parse_real<DDouble>("3.14159265358979323846264338327950288");
    const DDouble again = parse_real<DDouble>(format_real(pi));
    CHECK(std::abs(to_double(again - pi)) < 1e-30);

    const Scalar s = parse_scalar("0.25", Precision::Single);
    CHECK(s.precision() == Precision::Single);
    CHECK(format_scalar(s) == format_real(0.25f));
}

TEST_CASE("precision tags") {
    for (auto p : {Precision::Single, Precision::Double, Precision::Extended}) CHECK(parse_precision(to_string(p)) == p);
    CHECK_THROWS_AS(parse_precision("quad"), std::invalid_argument);
    CHECK(Precision::Single < Precision::Double);
    CHECK(Precision::Double < Precision::Extended);
    CHECK_THROWS(visit_net_precision(Precision::Extended, [](auto) { return 0; }));
    CHECK(visit_precision(Precision::Extended, []<class T>(std::type_identity<T>) { return std::numeric_limits<T>::digits; }) ==
          106);
}
