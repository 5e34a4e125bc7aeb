#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "lsmc/util.hpp"

using namespace lsmc;

TEST_SUITE("util") {

TEST_CASE("sigmoid matches hand values and is stable at extremes") {
    CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) == 0.0);
    for (double x : {-7.25, -0.3, 0.0, 0.4, 11.0}) {
        CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("softplus matches hand values and is stable at extremes") {
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(softplus(1000.0) == doctest::Approx(1000.0).epsilon(1e-15));
    CHECK(softplus(-1000.0) == 0.0);
    // softplus(x) - softplus(-x) == x identically
    for (double x : {-20.0, -1.5, 0.25, 3.0}) {
        CHECK(softplus(x) - softplus(-x) == doctest::Approx(x).epsilon(1e-13));
    }
    // derivative of softplus is sigmoid
    const double eps = 1e-6;
    for (double x : {-2.0, 0.1, 1.7}) {
        const double fd = (softplus(x + eps) - softplus(x - eps)) / (2 * eps);
        CHECK(fd == doctest::Approx(sigmoid(x)).epsilon(1e-8));
    }
}

TEST_CASE("KahanSum keeps tiny increments a naive double sum would drop") {
    // 1.0 followed by 1e4 additions of 1e-16; each naive add rounds back to 1.0
    KahanSum s;
    s.add(1.0);
    for (int i = 0; i < 10000; ++i) s.add(1e-16);
    CHECK(s.value() == doctest::Approx(1.0 + 1e-12).epsilon(1e-15));

    double naive = 1.0;
    for (int i = 0; i < 10000; ++i) naive += 1e-16;
    CHECK(naive == 1.0);  // demonstrates the failure mode being compensated
}

TEST_CASE("log_sum_exp handles shifts, singletons, and empty input") {
    CHECK(log_sum_exp({0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp({1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp({-1000.0, -1000.0}) ==
          doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp({3.0}) == doctest::Approx(3.0).epsilon(1e-15));
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK(log_sum_exp({}) == ninf);
    CHECK(log_sum_exp({ninf, ninf}) == ninf);
    CHECK(log_sum_exp({0.0, ninf}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("log_add_exp agrees with log_sum_exp") {
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK(log_add_exp(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(log_add_exp(ninf, 5.0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(log_add_exp(5.0, ninf) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(log_add_exp(2.0, -1.0) == doctest::Approx(log_sum_exp({2.0, -1.0})).epsilon(1e-15));
}

TEST_CASE("binom is exact and throws past 64-bit range") {
    CHECK(binom(0, 0) == 1);
    CHECK(binom(1, 0) == 1);
    CHECK(binom(10, 3) == 120);
    CHECK(binom(52, 5) == 2598960);
    CHECK(binom(10, 3) == binom(10, 7));
    CHECK(binom(3, 5) == 0);
    CHECK(binom(-1, 0) == 0);
    CHECK(binom(5, -2) == 0);
    // C(66,33) = 7219428434016265740 fits; C(68,34) ~ 2.8e19 does not
    CHECK(binom(66, 33) == 7219428434016265740ull);
    CHECK_THROWS_AS(binom(68, 34), std::overflow_error);
}

TEST_CASE("vector helpers: dot, squared_distance, l2_norm") {
    CHECK(dot({1.0, 2.0}, {3.0, 4.0}) == doctest::Approx(11.0).epsilon(1e-15));
    CHECK(dot({}, {}) == 0.0);
    CHECK_THROWS_AS(dot({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK(squared_distance({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(25.0).epsilon(1e-15));
    CHECK_THROWS_AS(squared_distance({1.0}, {}), std::invalid_argument);
    CHECK(l2_norm({3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(l2_norm({}) == 0.0);
}

TEST_CASE("Matrix stores row-major and round-trips entries") {
    Matrix m(2, 3, 0.0);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    m(0, 2) = 7.5;
    m(1, 0) = -1.0;
    CHECK(m(0, 2) == 7.5);
    CHECK(m(1, 0) == -1.0);
    CHECK(m(0, 0) == 0.0);
    CHECK(m.data()[0 * 3 + 2] == 7.5);
    CHECK(m.data()[1 * 3 + 0] == -1.0);
}

TEST_CASE("format_double round-trips doubles exactly") {
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(0.1) == "0.10000000000000001");
    for (double x : {3.141592653589793, -1e-300, 6.02214076e23, 0.0}) {
        CHECK(std::stod(format_double(x)) == x);
    }
}

}  // TEST_SUITE
