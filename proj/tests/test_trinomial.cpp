#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stoptree/rng.hpp"
#include "stoptree/trinomial.hpp"

using namespace stoptree;

namespace {

DiffusionModel capped_gbm() { return make_builtin(CappedGbm{10, 2, 10, 2}, -kInf, kInf, 4.0); }

DiffusionModel cev_model(double beta, double sigma0, double r, double lo, double hi,
                         double start) {
    return make_builtin(Cev{r, sigma0 * std::pow(start, -beta), beta}, lo, hi, start);
}

}  // namespace

TEST_CASE("sigma_bar honours the bound and the barrier commensurability") {
    const Payoff put = Payoff::put(100.0, 0.05, 0.5);
    const DiffusionModel m = cev_model(-1.0, 0.2, 0.05, 0.01, 200.0, 100.0);
    const TrinomialLattice L = build_trinomial(m, put, 2000);
    const double sq = std::sqrt(L.dt);
    CHECK(L.sigma_bar > m.bounds().sup_abs_sigma + sq * m.bounds().sup_abs_mu);
    // lower barrier anchored on the grid exactly
    CHECK(L.barrier_lo_effective() == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(L.lower_absorbing);
    // upper barrier pulled inward to a grid level, never beyond C
    CHECK(L.barrier_hi_effective() <= 200.0 + 1e-9);
    // barrier-option geometry: both knockout levels exactly on-grid
    const DiffusionModel mb = cev_model(-0.5, 0.25, 0.1, 90.0, 120.0, 100.0);
    const Payoff call = Payoff::call(95.0, 0.1, 0.5).with_knockout(90.0, 120.0);
    const TrinomialLattice Lb = build_trinomial(mb, call, 2000);
    CHECK(Lb.barrier_lo_effective() == doctest::Approx(90.0).epsilon(1e-12));
    CHECK(Lb.barrier_hi_effective() == doctest::Approx(120.0).epsilon(1e-12));
    CHECK(Lb.down_count * 2 == Lb.up_count);
}

TEST_CASE("capped GBM scheme-2 value matches the reported table") {
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const TrinomialLattice L =
        build_trinomial(capped_gbm(), put, 2000, CalibrationMode::lipschitz_shortcut);
    const SolveResult r = solve_trinomial(L, put);
    CHECK(r.root_value == doctest::Approx(0.6213).epsilon(1e-3 / 0.6213));
}

TEST_CASE("CEV scheme-2 value matches the reported table at n=15000") {
    const Payoff put = Payoff::put(90.0, 0.05, 0.5);
    const DiffusionModel m = cev_model(-1.0, 0.2, 0.05, 0.01, 200.0, 100.0);
    const TrinomialLattice L = build_trinomial(m, put, 15000, CalibrationMode::lipschitz_shortcut);
    CHECK(solve_trinomial(L, put).root_value == doctest::Approx(1.5123).epsilon(1e-3));
}

TEST_CASE("bisection and shortcut calibrations agree on CEV roots") {
    const Payoff put = Payoff::put(100.0, 0.05, 0.5);
    const DiffusionModel m = cev_model(-1.0 / 3.0, 0.2, 0.05, 0.01, 200.0, 100.0);
    const double vb = solve_trinomial(build_trinomial(m, put, 2000), put).root_value;
    const double vs = solve_trinomial(
                          build_trinomial(m, put, 2000, CalibrationMode::lipschitz_shortcut), put)
                          .root_value;
    CHECK(std::abs(vb - vs) / vb <= 1e-3);
}

TEST_CASE("node calibrations on the lattice are normalized and within tolerance") {
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const TrinomialLattice L = build_trinomial(capped_gbm(), put, 500);
    const double tol = std::pow(L.dt, 1.5);
    for (int i = std::max(L.interior_lo(), -(L.steps - 1));
         i <= std::min(L.interior_hi(), L.steps - 1); ++i) {
        const NodeCalibration& c = L.calibration(i);
        CHECK((c.q_up + c.q_dn) + c.q_mid == 1.0);
        CHECK(c.q_up >= 0.0);
        CHECK(c.q_mid >= 0.0);
        CHECK(c.q_dn >= 0.0);
        CHECK(c.residual <= tol);
        CHECK(c.amplitude > 0.0);
        CHECK(c.amplitude <= L.grid_step + 1e-15);
    }
    CHECK(L.distinct_calibrations < L.steps);  // constant tails share calibrations
}

TEST_CASE("American dominates European on the same lattice") {
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const TrinomialLattice L = build_trinomial(capped_gbm(), put, 500);
    const double am = solve_trinomial(L, put).root_value;
    const double eu = solve_trinomial(L, put, {}, /*european=*/true).root_value;
    CHECK(am >= eu - 1e-12);

    const DiffusionModel m = cev_model(-0.5, 0.25, 0.1, 90.0, 120.0, 100.0);
    const Payoff call = Payoff::call(95.0, 0.1, 0.5).with_knockout(90.0, 120.0);
    const TrinomialLattice Lb = build_trinomial(m, call, 500);
    CHECK(solve_trinomial_barrier(Lb, call).root_value >=
          solve_trinomial_barrier(Lb, call, {}, true).root_value - 1e-12);
}

TEST_CASE("knockout European with K >= U is worthless") {
    const DiffusionModel m = cev_model(-0.5, 0.25, 0.1, 90.0, 120.0, 100.0);
    const Payoff call = Payoff::call(120.0, 0.1, 0.5).with_knockout(90.0, 120.0);
    const TrinomialLattice L = build_trinomial(m, call, 200);
    CHECK(solve_trinomial_barrier(L, call, {}, true).root_value == 0.0);
}

TEST_CASE("knockout European matches the GBM double-barrier closed form") {
    // beta = 0 makes the model a plain GBM, for which the knockout call has a
    // series solution; the lattice value at n=2000 must sit within a few
    // tenths of a cent.
    const DiffusionModel m = cev_model(0.0, 0.25, 0.1, 90.0, 120.0, 100.0);
    const Payoff call = Payoff::call(100.0, 0.1, 0.5).with_knockout(90.0, 120.0);
    const TrinomialLattice L = build_trinomial(m, call, 2000);
    const double exact = oracles::db_knockout_call(100, 100, 0.1, 0.25, 0.5, 90, 120);
    CHECK(solve_trinomial_barrier(L, call, {}, true).root_value ==
          doctest::Approx(exact).epsilon(3e-3 / exact));
}

TEST_CASE("widening the knockout corridor never cheapens the option") {
    const Payoff base = Payoff::call(95.0, 0.1, 0.5);
    double prev = 0.0;
    for (double widen : {0.0, 5.0, 10.0}) {
        const double L = 90.0 - widen, U = 120.0 + widen;
        const DiffusionModel m = cev_model(-0.5, 0.25, 0.1, L, U, 100.0);
        const Payoff call = base.with_knockout(L, U);
        const TrinomialLattice lat = build_trinomial(m, call, 400);
        const double v = solve_trinomial_barrier(lat, call).root_value;
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}

TEST_CASE("knockout barriers must coincide with lattice levels") {
    const DiffusionModel m = cev_model(-0.5, 0.25, 0.1, 90.0, 120.0, 100.0);
    const Payoff call = Payoff::call(95.0, 0.1, 0.5);
    const TrinomialLattice L = build_trinomial(m, call, 400);
    CHECK_THROWS_AS(solve_trinomial_barrier(L, call.with_knockout(91.0, 120.0), {}, false),
                    ConfigError);
    CHECK_THROWS_AS(solve_trinomial_barrier(L, call, {}, false), ConfigError);  // no knockout
    CHECK_THROWS_AS(solve_trinomial(L, call.with_knockout(90.0, 120.0)), ConfigError);
}

TEST_CASE("trinomial stopping rule: degenerate shapes") {
    const DiffusionModel m = capped_gbm();
    SolveOptions opt;
    opt.want_stop_region = true;

    const Payoff flat = Payoff::custom([](double, double) { return 1.0; }, 0.5, 1.0);
    const SolveResult r1 = solve_trinomial(build_trinomial(m, flat, 32), flat, opt);
    CHECK(stopping_rule_trinomial(r1).should_stop(0, 0));

    const Payoff ramp = Payoff::custom([](double t, double) { return t; }, 0.5, 1.0);
    const SolveResult r2 = solve_trinomial(build_trinomial(m, ramp, 32), ramp, opt);
    const DiscreteStoppingRule rule = stopping_rule_trinomial(r2);
    for (int k = 0; k < 32; ++k)
        for (int i = -k; i <= k; ++i) CHECK_FALSE(rule.should_stop(k, i));
    CHECK(rule.should_stop(32, 0));
}

TEST_CASE("forward chain with calibrated q's reproduces the trinomial root") {
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const DiffusionModel m = capped_gbm();
    const int n = 2000;
    const TrinomialLattice L = build_trinomial(m, put, n);
    SolveOptions opt;
    opt.want_stop_region = true;
    const SolveResult r = solve_trinomial(L, put, opt);
    const DiscreteStoppingRule rule = stopping_rule_trinomial(r);

    const int paths = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int p = 0; p < paths; ++p) {
        Xoshiro256 rng(path_stream_seed(4242, p));
        int i = 0, k = 0;
        while (k < n && !rule.should_stop(k, i)) {
            const NodeCalibration& c = L.calibration(i);
            const double u = rng.uniform();
            i += u < c.q_dn ? -1 : (u < c.q_dn + c.q_mid ? 0 : +1);
            ++k;
        }
        const double v = put(k * L.dt, L.level(i));
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / paths;
    const double sd = std::sqrt((sumsq - sum * sum / paths) / (paths - 1));
    CHECK(std::abs(mean - r.root_value) <= 3.0 * sd / std::sqrt(double(paths)));
}

TEST_CASE("build rejects models violating the trinomial assumptions") {
    const Payoff put = Payoff::put(1.0, 0.0, 1.0);
    CustomCoeffs cc;
    cc.mu_fn = [](double) { return 1.0; };
    cc.sigma_fn = [](double) { return 0.0; };  // deterministic: no diffusion at all
    const DiffusionModel m(Coeffs{cc}, 0.0, 10.0, 1.0, 1000);
    CHECK_THROWS_AS(build_trinomial(m, put, 100), ConfigError);
    CHECK_THROWS_AS(build_trinomial(capped_gbm(), put, 0), ConfigError);
}

TEST_CASE("no interior grid is rejected") {
    // grid step >= min(x-B, C-x) at tiny n
    const DiffusionModel m = make_builtin(AbsorbedGbm{}, 3.9, 10.0, 4.0);
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    CHECK_THROWS_AS(build_trinomial(m, put, 2), ConfigError);
}
