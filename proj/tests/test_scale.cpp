#include <doctest.h>

#include <cmath>

#include "stoptree/rng.hpp"
#include "stoptree/scale.hpp"

using namespace stoptree;

namespace {

DiffusionModel const_coeff_model(double mu, double sigma, double lo = -kInf, double hi = kInf,
                                 double start = 0.0) {
    CustomCoeffs c;
    c.mu_fn = [mu](double) { return mu; };
    c.sigma_fn = [sigma](double) { return sigma; };
    return DiffusionModel(Coeffs{c}, lo, hi, start, 1000);
}

}  // namespace

TEST_CASE("scale function: zero drift gives p(y) = y - X0 exactly") {
    const DiffusionModel m = const_coeff_model(0.0, 1.3);
    const ScaleTable t = scale_function(m, 0.7, 0.25);
    CHECK(t.value(0.0) == 0.0);
    for (double off : {-0.25, -0.1, 0.03, 0.17, 0.25})
        CHECK(t.value(off) == doctest::Approx(off).epsilon(1e-14));
}

TEST_CASE("scale function: constant mu/sigma^2 matches the exponential closed form") {
    // p(y) = (1 - exp(-2c(y-X0)))/(2c) for mu/sigma^2 = c; quadrature must hit
    // 1e-8 relative over anchors spanning the model domain at realistic spans.
    Xoshiro256 rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const double c = -1.0 + 2.0 * rng.uniform();          // |c| <= 1
        const double sigma = 0.5 + 2.0 * rng.uniform();
        const double mu = c * sigma * sigma;
        const double span = 0.05 / std::max(1.0, std::abs(c));  // c*span <= 0.05
        const double anchor = -10.0 + 20.0 * rng.uniform();
        const DiffusionModel m = const_coeff_model(mu, sigma);
        const ScaleTable t = scale_function(m, anchor, span);
        for (double frac : {-1.0, -0.43, 0.21, 0.77, 1.0}) {
            const double off = frac * span;
            const double exact =
                std::abs(c) < 1e-14 ? off : (1.0 - std::exp(-2.0 * c * off)) / (2.0 * c);
            CHECK(t.value(off) == doctest::Approx(exact).epsilon(1e-8));
        }
    }
}

TEST_CASE("scale function is strictly increasing and anchored at zero") {
    const DiffusionModel m = make_builtin(Cir{2.0, 0.5, 2.0}, 0.01, 200.0, 40.0);
    const ScaleTable t = scale_function(m, 40.0, 0.5);
    CHECK(t.value(0.0) == 0.0);
    double prev = t.p.front();
    for (size_t i = 1; i < t.p.size(); ++i) {
        CHECK(t.p[i] > prev);
        prev = t.p[i];
    }
}

TEST_CASE("scale function rejects windows outside the barriers") {
    const DiffusionModel m = make_builtin(Cir{2.0, 0.5, 2.0}, 0.01, 200.0, 40.0);
    CHECK_THROWS_AS(scale_function(m, 0.2, 0.5), std::invalid_argument);
}

TEST_CASE("expected exit time: degenerate full-amplitude case returns h") {
    // sigma == sigma_bar, mu == 0, A = sigma_bar*sqrt(h): the trinomial
    // degenerates to the binomial and E[kappa] = h with no quadrature error.
    const double sigma_bar = 2.0, h = 0.01;
    const DiffusionModel m = const_coeff_model(0.0, sigma_bar);
    const double g = expected_exit_time(m, 0.0, sigma_bar * std::sqrt(h), sigma_bar, h);
    CHECK(g == doctest::Approx(h).epsilon(1e-13));
}

TEST_CASE("expected exit time: constant sigma < sigma_bar closed form") {
    // Remark algebra made exact: sigma^2 E[kappa_A] = sigma_bar * A * sqrt(h).
    const double sigma_bar = 3.0, h = 0.004, s = 1.1;
    const DiffusionModel m = const_coeff_model(0.0, s);
    for (double frac : {0.05, 0.31, 0.72, 1.0}) {
        const double A = frac * sigma_bar * std::sqrt(h);
        const double g = expected_exit_time(m, 0.0, A, sigma_bar, h);
        CHECK(g == doctest::Approx(sigma_bar * A * std::sqrt(h) / (s * s)).epsilon(1e-12));
    }
    CHECK(expected_exit_time(m, 0.0, 0.0, sigma_bar, h) == 0.0);
}

TEST_CASE("exit time is strictly increasing in the amplitude") {
    Xoshiro256 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        // random piecewise-affine coefficients around the anchor
        const double s0 = 0.5 + rng.uniform(), slope = -0.3 + 0.6 * rng.uniform();
        const double mu = -0.5 + rng.uniform();
        CustomCoeffs cc;
        cc.mu_fn = [mu](double) { return mu; };
        cc.sigma_fn = [s0, slope](double z) { return s0 + slope * std::tanh(z); };
        const DiffusionModel m(Coeffs{cc}, -kInf, kInf, 0.0, 1000);
        const double sigma_bar = 2.0 * (s0 + std::abs(slope)) + 1.0;
        const ScaleTable t = scale_function(m, 0.3, sigma_bar * 0.1);
        double prev = 0.0;
        for (int i = 1; i <= 16; ++i) {
            const double g = expected_exit_time(t, sigma_bar * 0.1 * i / 16.0);
            CHECK(g > prev);
            prev = g;
        }
    }
}

TEST_CASE("find_A_hat: degenerate constant-sigma case is exact") {
    const double sigma_bar = 2.0, h = 0.01;
    const DiffusionModel m = const_coeff_model(0.0, sigma_bar);
    const NodeCalibration c = find_A_hat(m, 0.0, sigma_bar, h);
    CHECK(c.amplitude == doctest::Approx(sigma_bar * std::sqrt(h)).epsilon(1e-12));
    CHECK(std::abs(c.q_up - 0.5) <= 1e-10);
    CHECK(std::abs(c.q_dn - 0.5) <= 1e-10);
    CHECK(std::abs(c.q_mid) <= 1e-10);
    CHECK(c.residual <= std::pow(h, 1.5));
}

TEST_CASE("find_A_hat: constant sigma below sigma_bar") {
    // A-hat = (s^2/sigma_bar) sqrt(h), q_up = q_dn = s^2/(2 sigma_bar^2).
    const double sigma_bar = 3.0, h = 0.0025, s = 1.4;
    const DiffusionModel m = const_coeff_model(0.0, s);
    const NodeCalibration c = find_A_hat(m, 0.0, sigma_bar, h);
    const double tol_amp = std::pow(h, 1.5) * sigma_bar / (s * s);  // residual / g'(A)
    CHECK(std::abs(c.amplitude - s * s * std::sqrt(h) / sigma_bar) <= 2.0 * tol_amp);
    CHECK(c.q_up == doctest::Approx(s * s / (2.0 * sigma_bar * sigma_bar)).epsilon(1e-3));
    CHECK(c.q_dn == doctest::Approx(s * s / (2.0 * sigma_bar * sigma_bar)).epsilon(1e-3));
    CHECK(c.q_mid == doctest::Approx(1.0 - s * s / (sigma_bar * sigma_bar)).epsilon(1e-3));
}

TEST_CASE("zero-drift symmetric sigma gives symmetric probabilities") {
    CustomCoeffs cc;
    cc.mu_fn = [](double) { return 0.0; };
    cc.sigma_fn = [](double z) { return 1.0 + 0.3 * std::cos(z - 2.0); };  // even about 2
    const DiffusionModel m(Coeffs{cc}, -kInf, kInf, 2.0, 1000);
    const NodeCalibration c = find_A_hat(m, 2.0, 2.0, 0.01);
    CHECK(std::abs(c.q_up - c.q_dn) <= 1e-10);
}

TEST_CASE("probability normalization is exact by construction") {
    const DiffusionModel m = make_builtin(Cir{2.0, 0.5, 2.0}, 0.01, 200.0, 40.0);
    Xoshiro256 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const double anchor = 2.0 + 180.0 * rng.uniform();
        const NodeCalibration c = find_A_hat(m, anchor, 30.0, 1e-4);
        CHECK((c.q_up + c.q_dn) + c.q_mid == 1.0);
        CHECK(c.q_up >= 0.0);
        CHECK(c.q_dn >= 0.0);
        CHECK(c.q_mid >= 0.0);
    }
}

TEST_CASE("bracket failure when sigma_bar is too small") {
    const DiffusionModel m = const_coeff_model(0.0, 2.0);
    CHECK_THROWS_AS(find_A_hat(m, 0.0, 1.0, 0.01), BracketFailure);  // sigma_bar < sigma
}

TEST_CASE("shortcut vs bisection amplitude: O(h) agreement on CEV") {
    // |A_bisect - A_shortcut| should shrink roughly like h (ratio ~4 per
    // quadrupling of n); asserted with a wide band plus strict decrease.
    const double beta = -1.0 / 3.0;
    const double delta = 0.2 * std::pow(100.0, 1.0 / 3.0);
    const DiffusionModel m = make_builtin(Cev{0.05, delta, beta}, 0.01, 200.0, 100.0);
    const double T = 0.5;
    const double sigma_bar = 1.0001 * (m.bounds().sup_abs_sigma + m.bounds().sup_abs_mu * 0.1);
    double prev_diff = 0.0;
    int i = 0;
    for (int n : {100, 400, 1600}) {
        const double h = T / n;
        const ScaleTable t = scale_function(m, 100.0, sigma_bar * std::sqrt(h));
        // full bisection so the comparison is not polluted by the h^{3/2}
        // stopping tolerance
        double lo = 0.0, hi = t.half_span;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (expected_exit_time(t, mid) < h ? lo : hi) = mid;
        }
        const double a_bis = 0.5 * (lo + hi);
        const double a_short = calibrate_node_shortcut(t, sigma_bar, h).amplitude;
        const double diff = std::abs(a_bis - a_short);
        if (i > 0) {
            // observed ~8 per quadrupling on CEV (faster than the O(h) bound)
            const double ratio = prev_diff / diff;
            CHECK(ratio > 1.7);
            CHECK(ratio < 16.0);
        }
        prev_diff = diff;
        ++i;
    }
}

TEST_CASE("halving the quadrature sub-step moves A-hat less than the bisection tolerance") {
    struct Case { DiffusionModel model; double anchor; };
    const double delta = 0.2 * std::pow(100.0, 1.0 / 3.0);
    const Case cases[] = {
        {make_builtin(CappedGbm{10, 2, 10, 2}, -kInf, kInf, 4.0), 4.0},
        {make_builtin(Cev{0.05, delta, -1.0 / 3.0}, 0.01, 200.0, 100.0), 100.0},
        {make_builtin(Cir{2.0, 0.5, 2.0}, 0.01, 200.0, 40.0), 40.0},
        {make_builtin(RegimeSwitchVol{0.1, 0.7, 0.3, 8.0}, 2.0, 10.0, 8.0), 8.0},
        {make_builtin(AbsorbedGbm{}, 2.0, 10.0, 4.0), 4.0},
    };
    for (const auto& c : cases) {
        const double h = 1e-3;
        const double sigma_bar =
            1.0001 * (c.model.bounds().sup_abs_sigma + std::sqrt(h) * c.model.bounds().sup_abs_mu);
        const NodeCalibration c256 = find_A_hat(c.model, c.anchor, sigma_bar, h, 256);
        const NodeCalibration c512 = find_A_hat(c.model, c.anchor, sigma_bar, h, 512);
        const double tol_amp = std::pow(h, 1.5) / (h / (sigma_bar * std::sqrt(h)));  // tol / g'(A)
        CHECK(std::abs(c256.amplitude - c512.amplitude) <= tol_amp);
    }
}
