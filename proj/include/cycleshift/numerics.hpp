#pragma once

#include <functional>
#include <vector>

namespace cycleshift::numerics {

/// Adaptive Gauss-Kronrod (7/15 point) quadrature of a scalar integrand.
/// A subinterval is bisected until its error estimate is below
/// max(rel_tol |estimate|, its share of abs_tol).
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-11, double abs_tol = 1e-11);

/// Same as `integrate`, summed over the consecutive pieces of `breaks`.
double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& breaks,
                        double rel_tol = 1e-11, double abs_tol = 1e-11);

struct Minimum {
  double x;
  double value;
};

/// Bracketed scalar minimisation (Brent).
Minimum minimize(const std::function<double(double)>& f, double lo, double hi);

/// Root of f in [lo, hi]; f(lo) and f(hi) must differ in sign.
double find_root(const std::function<double(double)>& f, double lo, double hi);

}  // namespace cycleshift::numerics
