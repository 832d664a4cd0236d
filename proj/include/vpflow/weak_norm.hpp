#pragma once

#include <vector>

#include "vpflow/grid.hpp"

namespace vp {

// Marcinkiewicz quasinorm sup_gamma gamma * L^N({|u| >= gamma})^{1/p},
// with gamma restricted to the realized node magnitudes (where the discrete
// supremum is attained) and the level-set measure counted in cell volumes.
double weak_quasinorm(const GridField& u, double p);

// || g(.+h) - g ||_{L^p(R^N)} for g(x) = x/|x|^N, 1 < p < N/(N-1).
// The |x| <= 2|h| part (both singularities) is the exactly h-scaled integral
// of |g(u+e1)-g(u)|^p over |u| <= 2, computed once per (N,p) on a polar mesh
// with small exclusion balls handled in closed form; the outer part is a
// fixed log-radial shell quadrature in absolute coordinates.
double kernel_translation_error(double h_mag, double p, int dim);

// Least-squares slope of log error vs log |h|.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
};
SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace vp
