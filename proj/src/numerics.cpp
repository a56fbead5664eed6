#include "cycleshift/numerics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "cycleshift/errors.hpp"

namespace cycleshift::numerics {

namespace {

constexpr int kMaxDepth = 14;

using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;

double adapt(const std::function<double(double)>& f, double a, double b, double rel_tol,
             double abs_tol, int depth) {
  double error = 0.0;
  const double value = Rule::integrate(f, a, b, 0, 0.0, &error);
  if (error <= std::max(abs_tol, rel_tol * std::abs(value)) || depth >= kMaxDepth) return value;
  const double mid = 0.5 * (a + b);
  return adapt(f, a, mid, rel_tol, 0.5 * abs_tol, depth + 1) +
         adapt(f, mid, b, rel_tol, 0.5 * abs_tol, depth + 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double abs_tol) {
  if (a == b) return 0.0;
  return adapt(f, a, b, rel_tol, abs_tol, 0);
}

double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& breaks,
                        double rel_tol, double abs_tol) {
  if (breaks.size() < 2) return 0.0;
  const double total = std::abs(breaks.back() - breaks.front());
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double share = total > 0.0 ? std::abs(breaks[i + 1] - breaks[i]) / total : 1.0;
    sum += integrate(f, breaks[i], breaks[i + 1], rel_tol, abs_tol * share);
  }
  return sum;
}

Minimum minimize(const std::function<double(double)>& f, double lo, double hi) {
  std::uintmax_t max_iter = 200;
  const auto [x, value] =
      boost::math::tools::brent_find_minima(f, lo, hi, std::numeric_limits<double>::digits / 2, max_iter);
  return {x, value};
}

double find_root(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw Error(ErrorKind::InvalidData, "root bracket does not change sign");
  }
  std::uintmax_t max_iter = 200;
  boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 4);
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (a + b);
}

}  // namespace cycleshift::numerics
