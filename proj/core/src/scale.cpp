#include "stoptree/scale.hpp"

#include <cmath>
#include <stdexcept>

namespace stoptree {

double ScaleTable::value(double offset) const {
    int m = static_cast<int>(std::floor((offset + half_span) / cell));
    if (m < 0) m = 0;
    if (m >= cells) m = cells - 1;
    const double left = -half_span + m * cell;
    return p[m] + (offset - left) * p_slope[m];
}

namespace detail {

ScaleTable make_scale_table(double anchor, double half_span, std::vector<double> sigma2_mid,
                            std::vector<double> psi_mid, double sigma2_anchor) {
    ScaleTable t;
    t.anchor = anchor;
    t.half_span = half_span;
    t.cells = static_cast<int>(sigma2_mid.size());
    t.cell = 2.0 * half_span / t.cells;
    t.sigma2_anchor = sigma2_anchor;
    t.p.assign(t.cells + 1, 0.0);
    t.p_slope.assign(t.cells, 0.0);
    t.inv_sigma2.resize(t.cells);
    for (int m = 0; m < t.cells; ++m) t.inv_sigma2[m] = 1.0 / sigma2_mid[m];

    // U(b) = int_{X0}^{b} psi by cumulative midpoint sums from the center
    // boundary, then p'(mid) = exp(-2 U(mid)) with the half-cell correction.
    const int center = t.cells / 2;  // boundary index of X0
    std::vector<double> bndU(t.cells + 1, 0.0);
    for (int m = center; m < t.cells; ++m) bndU[m + 1] = bndU[m] + t.cell * psi_mid[m];
    for (int m = center - 1; m >= 0; --m) bndU[m] = bndU[m + 1] - t.cell * psi_mid[m];

    for (int m = 0; m < t.cells; ++m) {
        const double midU = bndU[m] + 0.5 * t.cell * psi_mid[m];
        t.p_slope[m] = std::exp(-2.0 * midU);
    }
    for (int m = center; m < t.cells; ++m) t.p[m + 1] = t.p[m] + t.cell * t.p_slope[m];
    for (int m = center - 1; m >= 0; --m) t.p[m] = t.p[m + 1] - t.cell * t.p_slope[m];
    return t;
}

}  // namespace detail

ScaleTable scale_function(const DiffusionModel& model, double anchor, double half_span,
                          int cells_per_side) {
    if (!(half_span > 0.0)) throw std::invalid_argument("scale_function: span must be positive");
    const double tol = 1e-9 * half_span;
    if (anchor - half_span < model.barrier_lo() - tol ||
        anchor + half_span > model.barrier_hi() + tol)
        throw std::invalid_argument("scale_function: window leaves [B, C]");

    const double s0 = model.sigma(anchor);
    if (!std::isfinite(s0) || s0 <= 0.0)
        throw NumericalError("sigma(X0) is not positive at X0=" + std::to_string(anchor));

    const int cells = 2 * cells_per_side;
    const double cell = half_span / cells_per_side;
    std::vector<double> sigma2(cells), psi(cells);
    for (int m = 0; m < cells; ++m) {
        const double z = anchor - half_span + (m + 0.5) * cell;
        const double sg = model.sigma(z);
        const double mu = model.mu(z);
        if (!std::isfinite(sg) || sg <= 0.0 || !std::isfinite(mu))
            throw NumericalError("non-finite coefficient in window at z=" + std::to_string(z) +
                                 " (sigma=" + std::to_string(sg) + ")");
        sigma2[m] = sg * sg;
        psi[m] = mu / sigma2[m];
    }
    return detail::make_scale_table(anchor, half_span, std::move(sigma2), std::move(psi),
                                    s0 * s0);
}

namespace {

// Integrates kernel(u)/sigma^2(u) du over [lo, hi] in offset coordinates:
// the kernel is piecewise linear with breakpoints in `kinks`, 1/sigma^2 is
// frozen at each cell midpoint, and the linear pieces are integrated exactly.
template <typename Kernel>
double integrate_against(const ScaleTable& t, double lo, double hi, const double* kinks,
                         int n_kinks, Kernel&& kernel) {
    if (!(hi > lo)) return 0.0;
    const double s = t.half_span;
    int m_first = static_cast<int>(std::floor((lo + s) / t.cell));
    int m_last = static_cast<int>(std::floor((hi + s) / t.cell));
    if (m_first < 0) m_first = 0;
    if (m_last >= t.cells) m_last = t.cells - 1;

    double acc = 0.0;
    for (int m = m_first; m <= m_last; ++m) {
        const double cl = -s + m * t.cell;
        const double a = std::max(lo, cl);
        const double b = std::min(hi, cl + t.cell);
        if (!(b > a)) continue;
        // Split the sub-segment at interior kernel breakpoints.
        double seg = 0.0;
        double left = a;
        double kl = kernel(left);
        for (int k = 0; k < n_kinks; ++k) {
            const double c = kinks[k];
            if (c > left && c < b) {
                const double kc = kernel(c);
                seg += (c - left) * 0.5 * (kl + kc);
                left = c;
                kl = kc;
            }
        }
        seg += (b - left) * 0.5 * (kl + kernel(b));
        acc += seg * t.inv_sigma2[m];
    }
    return acc;
}

}  // namespace

double expected_exit_time(const ScaleTable& t, double amplitude) {
    const double A = amplitude;
    const double s = t.half_span;
    if (A <= 0.0) return 0.0;

    // First leg: exit of (X0-A, X0+A) from the center.
    const double kinks1[] = {0.0};
    const double leg1 = integrate_against(
        t, -A, A, kinks1, 1, [A](double u) { return A - std::abs(u); });

    // Second leg, upper branch: from X0+A settle on X0 or X0+s.
    const double kinks2[] = {A};
    const double leg2 = integrate_against(t, 0.0, s, kinks2, 1, [A, s](double u) {
        return std::min(u, A) * (s - std::max(u, A)) / s;
    });

    // Second leg, lower branch (mirror image).
    const double kinks3[] = {-A};
    const double leg3 = integrate_against(t, -s, 0.0, kinks3, 1, [A, s](double u) {
        return std::min(-u, A) * (s - std::max(-u, A)) / s;
    });

    return leg1 + leg2 + leg3;
}

double expected_exit_time(const DiffusionModel& model, double anchor, double amplitude,
                          double sigma_bar, double dt, int cells_per_side) {
    const ScaleTable t = scale_function(model, anchor, sigma_bar * std::sqrt(dt), cells_per_side);
    return expected_exit_time(t, amplitude);
}

namespace {

NodeCalibration finish_calibration(const ScaleTable& t, double amplitude, double dt,
                                   int iterations) {
    NodeCalibration c;
    c.amplitude = amplitude;
    c.iterations = iterations;
    c.residual = std::abs(expected_exit_time(t, amplitude) - dt);

    const double pA = t.value(amplitude);
    const double pmA = t.value(-amplitude);
    const double p_top = t.p.back();
    const double p_bot = t.p.front();
    const double straddle = pA - pmA;
    c.q_up = (-pmA * pA) / (straddle * p_top);
    c.q_dn = (pA * -pmA) / (straddle * -p_bot);
    c.q_mid = 1.0 - (c.q_up + c.q_dn);
    return c;
}

}  // namespace

NodeCalibration calibrate_node(const ScaleTable& t, double dt) {
    const double s = t.half_span;
    const double tol = std::pow(dt, 1.5);
    const double g_full = expected_exit_time(t, s);
    if (g_full < dt - tol) throw BracketFailure(t.anchor, g_full, dt);
    if (g_full <= dt + tol) return finish_calibration(t, s, dt, 0);

    double lo = 0.0, hi = s, mid = 0.5 * s;
    int it = 0;
    for (; it < 80; ++it) {
        mid = 0.5 * (lo + hi);
        const double g = expected_exit_time(t, mid);
        if (std::abs(g - dt) <= tol) break;
        (g < dt ? lo : hi) = mid;
    }
    return finish_calibration(t, mid, dt, it + 1);
}

NodeCalibration calibrate_node_shortcut(const ScaleTable& t, double sigma_bar, double dt) {
    double amplitude = t.sigma2_anchor * std::sqrt(dt) / sigma_bar;
    if (amplitude > t.half_span) amplitude = t.half_span;
    return finish_calibration(t, amplitude, dt, 0);
}

NodeCalibration find_A_hat(const DiffusionModel& model, double anchor, double sigma_bar,
                           double dt, int cells_per_side) {
    const ScaleTable t = scale_function(model, anchor, sigma_bar * std::sqrt(dt), cells_per_side);
    return calibrate_node(t, dt);
}

}  // namespace stoptree
