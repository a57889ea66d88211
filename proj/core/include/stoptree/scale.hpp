#pragma once

#include <vector>

#include "stoptree/model.hpp"

namespace stoptree {

// ---------------------------------------------------------------------------
// Scale function and exit-time calculus on one node window [X0-s, X0+s].
//
// The window is cut into 2Q uniform cells. Coefficients are sampled once at
// the cell midpoints; every integral below is evaluated against those fixed
// samples (piecewise-linear kernels integrated exactly, 1/sigma^2 frozen at
// the cell midpoint). Midpoint sampling never touches cell edges, so
// coefficient jumps at grid-commensurate points stay harmless. Because the
// whole calibration is a pure function of the sampled values, windows with
// identical samples can share one calibration bitwise.
// ---------------------------------------------------------------------------

/// Tabulated scale function p on [X0-s, X0+s] with p(X0)=0, p'(X0)=1,
///   p(y) = int_{X0}^{y} exp(-2 int_{X0}^{z} mu/sigma^2 dw) dz.
struct ScaleTable {
    double anchor = 0.0;     // X0
    double half_span = 0.0;  // s
    double cell = 0.0;       // s / cells_per_side
    int cells = 0;           // 2 * cells_per_side

    std::vector<double> p;           // at cell boundaries, size cells+1
    std::vector<double> p_slope;     // p' at cell midpoints, size cells
    std::vector<double> inv_sigma2;  // 1/sigma^2 at cell midpoints, size cells
    double sigma2_anchor = 0.0;      // sigma^2 sampled at X0 itself

    /// p at anchor + offset, offset in [-s, s]; piecewise linear with the
    /// midpoint slopes, consistent with the boundary values.
    double value(double offset) const;
};

/// Builds the scale table by composite-midpoint quadrature. Throws
/// NumericalError if a non-finite or non-positive sigma is sampled, and
/// std::invalid_argument if the window leaves [B, C].
ScaleTable scale_function(const DiffusionModel& model, double anchor, double half_span,
                          int cells_per_side = 256);

/// Three-integral approximation of E[kappa^{X0}_A]: expected time for the
/// diffusion to first move A away from X0 and then settle on X0 or X0 +- s.
/// The table's half_span plays the role of sigma_bar * sqrt(h).
double expected_exit_time(const ScaleTable& table, double amplitude);

/// Convenience overload that builds the window table first.
double expected_exit_time(const DiffusionModel& model, double anchor, double amplitude,
                          double sigma_bar, double dt, int cells_per_side = 256);

/// One calibrated trinomial node.
struct NodeCalibration {
    double amplitude = 0.0;  // A-hat in (0, sigma_bar*sqrt(h)]
    double q_up = 0.0;
    double q_mid = 0.0;      // defined as 1 - q_up - q_dn
    double q_dn = 0.0;
    double residual = 0.0;   // |E[kappa](A-hat) - h| achieved
    int iterations = 0;      // bisection steps (0 in shortcut mode)
};

/// Solves E[kappa](A) = dt by bisection on (0, half_span] and fills the
/// transition probabilities from the scale table. Throws BracketFailure when
/// even the full amplitude exits too fast (sigma_bar chosen too small).
NodeCalibration calibrate_node(const ScaleTable& table, double dt);

/// Lipschitz shortcut: A-hat = sigma^2(X0) sqrt(h) / sigma_bar, probabilities
/// from the same table; residual is still measured for diagnostics.
NodeCalibration calibrate_node_shortcut(const ScaleTable& table, double sigma_bar, double dt);

/// Spec-level wrapper: window table plus bisection in one call.
NodeCalibration find_A_hat(const DiffusionModel& model, double anchor, double sigma_bar,
                           double dt, int cells_per_side = 256);

namespace detail {

/// Builds the table from pre-sampled midpoint values; the whole downstream
/// calibration is a pure function of these samples, which is what makes
/// window-level caching bitwise-safe.
ScaleTable make_scale_table(double anchor, double half_span, std::vector<double> sigma2_mid,
                            std::vector<double> psi_mid, double sigma2_anchor);

}  // namespace detail

}  // namespace stoptree
