#include "doctest.h"

#include <cmath>
#include <numbers>

#include "cycleshift/errors.hpp"
#include "cycleshift/numerics.hpp"

using namespace cycleshift;

TEST_CASE("quadrature matches closed-form integrals") {
  const double pi = std::numbers::pi;
  CHECK(numerics::integrate([](double x) { return std::exp(2.0 * x); }, 0.0, 1.0) ==
        doctest::Approx((std::exp(2.0) - 1.0) / 2.0).epsilon(1e-13));
  CHECK(numerics::integrate([](double x) { return std::sin(x) * std::sin(x); }, 0.0, 2.0 * pi) ==
        doctest::Approx(pi).epsilon(1e-13));
  // Sharp peak forces bisection.
  const double peak = numerics::integrate([](double x) { return 1.0 / (1e-4 + x * x); }, -1.0, 1.0);
  CHECK(peak == doctest::Approx(2.0 / 1e-2 * std::atan(1.0 / 1e-2)).epsilon(1e-9));
}

TEST_CASE("quadrature of a vanishing integrand returns quickly and stays tiny") {
  const double v = numerics::integrate([](double x) { return 1e-17 * std::sin(37.0 * x); }, 0.0, 3.0);
  CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("piecewise quadrature sums the pieces") {
  const std::vector<double> breaks = {0.0, 0.5, 1.7, 3.0};
  CHECK(numerics::integrate_pieces([](double x) { return x * x; }, breaks) == doctest::Approx(9.0).epsilon(1e-13));
  CHECK(numerics::integrate_pieces([](double x) { return x; }, {1.0}) == 0.0);
}

TEST_CASE("minimize and find_root") {
  const auto m = numerics::minimize([](double x) { return (x - 0.3) * (x - 0.3) + 2.0; }, -1.0, 1.0);
  CHECK(m.x == doctest::Approx(0.3).epsilon(1e-7));
  CHECK(m.value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(numerics::find_root([](double x) { return std::cos(x); }, 0.0, 3.0) ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));
  CHECK_THROWS_AS(numerics::find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), Error);
}
