#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "stoptree/path_lab.hpp"
#include "stoptree/rng.hpp"

using namespace stoptree;

namespace {

DiffusionModel capped_gbm() { return make_builtin(CappedGbm{10, 2, 10, 2}, -kInf, kInf, 4.0); }

DiffusionModel const_model(double mu, double sigma, double start = 0.0) {
    return make_builtin(CappedGbm{mu, mu, sigma, sigma}, -kInf, kInf, start);
}

}  // namespace

TEST_CASE("deterministic drift path ends where the ODE says") {
    CustomCoeffs cc;
    cc.mu_fn = [](double) { return 1.0; };
    cc.sigma_fn = [](double) { return 0.0; };
    const DiffusionModel m(Coeffs{cc}, -kInf, kInf, 0.0, 100);
    const PathBundle bundle = simulate_paths(m, 1.0, 1e-4, 4, 9);
    for (int p = 0; p < 4; ++p) {
        const auto tr = bundle.trajectory(p);
        CHECK(tr.y.back() == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("GBM terminal mean matches the closed-form moment") {
    // dS = 0.1 S dt + S dW from x=1: E[S_T] = exp(0.1 T).
    const DiffusionModel m = make_builtin(Cev{0.1, 1.0, 0.0}, -kInf, kInf, 1.0);
    const double T = 0.5;
    const PathBundle bundle = simulate_paths(m, T, T / 256.0, 100000, 20240808);
    double sum = 0.0, sumsq = 0.0;
    for (int p = 0; p < bundle.count(); ++p) {
        const auto tr = bundle.trajectory(p);
        sum += tr.y.back();
        sumsq += tr.y.back() * tr.y.back();
    }
    const int n = bundle.count();
    const double mean = sum / n;
    const double se = std::sqrt((sumsq - sum * sum / n) / (n - 1) / n);
    CHECK(std::abs(mean - std::exp(0.1 * T)) <= 3.0 * se);
}

TEST_CASE("absorbed GBM trajectories stay inside the barriers") {
    const DiffusionModel m = make_builtin(AbsorbedGbm{}, 2.0, 10.0, 4.0);
    const PathBundle bundle = simulate_paths(m, 0.5, 1e-4, 64, 5);
    for (int p = 0; p < bundle.count(); ++p) {
        const auto tr = bundle.trajectory(p);
        for (double x : tr.x) {
            CHECK(x >= 2.0);
            CHECK(x <= 10.0);
        }
        if (tr.absorbed) {
            CHECK((tr.x.back() == 2.0 || tr.x.back() == 10.0));
        }
    }
}

TEST_CASE("path streams are deterministic and count-independent") {
    const DiffusionModel m = capped_gbm();
    const PathBundle small = simulate_paths(m, 0.25, 1e-3, 4, 123);
    const PathBundle large = simulate_paths(m, 0.25, 1e-3, 4096, 123);
    const auto a = small.trajectory(3), b = large.trajectory(3);
    REQUIRE(a.y.size() == b.y.size());
    for (size_t i = 0; i < a.y.size(); ++i) CHECK(a.y[i] == b.y[i]);
}

TEST_CASE("binomial embedding of the unit-volatility walk: mean increment is h") {
    // sigma == 1, mu == 0: the embedding is the classical Skorokhod embedding
    // of +-sqrt(h), whose mean hitting time is exactly h.
    const DiffusionModel m = const_model(0.0, 1.0);
    const Payoff put = Payoff::put(1.0, 0.0, 0.5);
    const int n = 64;
    const BinomialLattice L = build_binomial(m, put, n);
    McParams mc;
    mc.paths = 128;
    mc.dt = L.dt / 20000.0;
    mc.seed = 31;
    const EmbeddingStats st = embedding_stats_binomial(m, L, put, mc);
    CHECK(st.paths_excluded == 0);
    CHECK(st.increments == 128l * n);
    CHECK(std::abs(st.mean_increment - L.dt) <= 3.0 * st.stderr_increment);
}

TEST_CASE("binomial embedded move frequencies match the transition law") {
    const DiffusionModel m = capped_gbm();
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const BinomialLattice L = build_binomial(m, put, 100);
    const int paths = 20000;
    int checked = 0;
    for (int j : {-6, -1, 0, 3, 8}) {
        for (int y : {-1, +1}) {
            const BinarySample s =
                sample_binomial_increment(m, L, j, y, L.dt / 4000.0, paths, 100 + j * 2 + y);
            const double p = L.up_probability(j, y);
            const double se = std::sqrt(std::max(p * (1 - p), 1e-6) / paths);
            CHECK(std::abs(s.freq_up - p) <= 4.0 * se + 0.004);
            ++checked;
        }
    }
    CHECK(checked == 10);
}

TEST_CASE("trinomial embedded move frequencies match the node calibration") {
    const DiffusionModel m = capped_gbm();
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const TrinomialLattice L = build_trinomial(m, put, 400);
    const int paths = 20000;
    for (int i : {-2, 0, 5}) {
        const NodeCalibration& c = L.calibration(i);
        const IncrementSample s = sample_trinomial_increment(
            m, L.level(i), c.amplitude, L.grid_step, L.dt / 4000.0, paths, 55 + i);
        auto band = [&](double p) { return 4.0 * std::sqrt(std::max(p * (1 - p), 1e-6) / paths) + 0.004; };
        CHECK(std::abs(s.freq_up - c.q_up) <= band(c.q_up));
        CHECK(std::abs(s.freq_mid - c.q_mid) <= band(c.q_mid));
        CHECK(std::abs(s.freq_dn - c.q_dn) <= band(c.q_dn));
        // mean embedded time approximates h (detection bias allowance on top
        // of the Monte Carlo band)
        CHECK(std::abs(s.mean_time - L.dt) <= 3.0 * s.stderr_time + 0.02 * L.dt);
    }
}

TEST_CASE("stopping rules never look ahead") {
    const DiffusionModel m = capped_gbm();
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const int n = 100;
    const BinomialLattice L = build_binomial(m, put, n);
    SolveOptions opt;
    opt.want_stop_region = true;
    const DiscreteStoppingRule rule = stopping_rule(solve_binomial(L, put, opt));

    const PathBundle bundle = simulate_paths(m, 0.5, L.dt / 200.0, 64, 2024);
    const auto traces = embed_binomial(bundle, L, put.maturity());
    auto first_stop = [&](const EmbeddingTrace& tr, bool reversed) {
        const int K = int(tr.offsets.size()) - 1;
        for (int k = 0; k <= K; ++k) {
            const int idx = reversed ? K - k : k;
            if (k >= n || rule.should_stop(k, tr.offsets[idx], tr.memories[idx])) return k;
        }
        return K;
    };
    int diffs = 0;
    for (const auto& tr : traces)
        if (tr.complete && first_stop(tr, false) != first_stop(tr, true)) ++diffs;
    CHECK(diffs > 0);
}

TEST_CASE("always-stop rule gives the immediate payoff with zero spread") {
    const DiffusionModel m = capped_gbm();
    const Payoff flat = Payoff::custom([](double, double) { return 2.5; }, 0.5, 1.0);
    const TrinomialLattice L = build_trinomial(m, flat, 50);
    SolveOptions opt;
    opt.want_stop_region = true;
    const DiscreteStoppingRule rule = stopping_rule_trinomial(solve_trinomial(L, flat, opt));
    McParams mc;
    mc.paths = 200;
    mc.dt = L.dt / 200.0;
    const PolicyEstimate est = lift_trinomial(m, L, rule, flat, mc);
    CHECK(est.mean == 2.5);
    CHECK(est.stderr_mean == 0.0);
    CHECK(est.paths_used == 200);
}

TEST_CASE("trace-based evaluation agrees with the fused pipeline path by path") {
    const DiffusionModel m = capped_gbm();
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const int n = 50;
    const TrinomialLattice L = build_trinomial(m, put, n);
    SolveOptions opt;
    opt.want_stop_region = true;
    const DiscreteStoppingRule rule = stopping_rule_trinomial(solve_trinomial(L, put, opt));

    McParams mc;
    mc.paths = 40;
    mc.dt = L.dt / 200.0;
    mc.seed = 77;
    const PolicyEstimate fused = lift_trinomial(m, L, rule, put, mc);

    const PathBundle bundle = simulate_paths(m, 0.5, mc.dt, mc.paths, mc.seed);
    const auto traces = embed_trinomial(bundle, L, put.maturity());
    const PolicyEstimate from_traces = evaluate_lifted_policy(traces, rule, put);
    CHECK(fused.mean == doctest::Approx(from_traces.mean).epsilon(1e-12));
    CHECK(fused.paths_used == from_traces.paths_used);
}

TEST_CASE("exhausted horizons are excluded and counted") {
    const DiffusionModel m = capped_gbm();
    const Payoff put = Payoff::put(4.0, 0.1, 0.5);
    const BinomialLattice L = build_binomial(m, put, 200);
    McParams mc;
    mc.paths = 16;
    mc.dt = L.dt / 200.0;
    mc.give_up_factor = 0.02;  // absurdly small cap: nothing can finish
    const EmbeddingStats st = embedding_stats_binomial(m, L, put, mc);
    CHECK(st.paths_excluded == 16);
    CHECK(st.paths_used == 0);
}

TEST_CASE("bundle validation") {
    const DiffusionModel m = capped_gbm();
    CHECK_THROWS_AS(simulate_paths(m, 0.5, 1e-3, 0, 1), ConfigError);
    CHECK_THROWS_AS(simulate_paths(m, 0.5, -1e-3, 10, 1), ConfigError);
    CHECK_THROWS_AS(simulate_paths(m, 0.0, 1e-3, 10, 1), ConfigError);
}
