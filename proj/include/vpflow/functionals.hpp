#pragma once

#include <vector>

#include "vpflow/flow.hpp"
#include "vpflow/grid.hpp"

namespace vp {

// Analysis knobs shared by the stability functionals.
struct FunctionalParams {
    double r = 2.0;        // ball radius in phase space
    double lambda = 6.0;   // sublevel threshold
    double gamma = 0.25;   // deviation threshold
    double delta = 1e-3;   // log regularization
    double alpha = 0.3;    // superlevel exponent, in (0, 1/3)

    void validate() const;
};

// beta(y) = (1 + log(1 + y))^alpha and its derivative.
double beta(double y, double alpha);
double beta_prime(double y, double alpha);

// Lattice integral over B_r of beta(max_s |V(s)|^2 / 2): the uniform bound
// controlling superlevel decay in three dimensions.
double beta_superlevel_functional(const FlowHistory& h, double r, double alpha);

// Phi_delta(s) over seeds in B_r whose trajectories stay in the
// lambda-sublevel for BOTH flows; the excluded measure is reported
// alongside, mirroring the superlevel terms of the deviation bound.
struct PhiSeries {
    std::vector<double> times;
    std::vector<double> values;
    double covered_measure = 0.0;   // measure of B_r seeds with both masks true
    double excluded_measure = 0.0;  // measure of B_r seeds escaping either sublevel
};

PhiSeries phi_delta(const FlowHistory& a, const FlowHistory& b, const FunctionalParams& params);

// L^{2N}(B_r intersect {|Z_a(s) - Z_b(s)| > gamma}) at one stored sample time.
double deviation_measure(const FlowHistory& a, const FlowHistory& b, double gamma, double r, double s);

// ||b - b_bar||_{L^1((0,T) x B_lambda)}: only the field components differ,
// so this is the time-quadrature over samples of int |E_a - E_b| times the
// velocity-section volume of the phase-space ball.
double field_difference_norm(const FlowHistory& a, const FlowHistory& b, double lambda,
                             const GridSpec& spatial_grid);

// (R1) decomposition of E/(1+|x|+|v|) for N <= 2: L^1 norm on {|v| <= |E|}
// by tensorized midpoint quadrature over the velocity box, sup norm on the
// complement. N = 3 is rejected (the decomposition fails there).
struct R1Norms {
    double l1 = 0.0;
    double linf = 0.0;
};

R1Norms r1_decomposition_norms(const GridField& e_field, double v_extent, int v_cells);

}  // namespace vp
