#pragma once

// Test-side closed forms, kept independent of the lattice code paths they
// check.

#include <cmath>

namespace oracles {

inline double norm_cdf(double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); }

inline double bs_put(double S, double K, double r, double vol, double T) {
    const double d1 = (std::log(S / K) + (r + 0.5 * vol * vol) * T) / (vol * std::sqrt(T));
    const double d2 = d1 - vol * std::sqrt(T);
    return K * std::exp(-r * T) * norm_cdf(-d2) - S * norm_cdf(-d1);
}

inline double bs_call(double S, double K, double r, double vol, double T) {
    return bs_put(S, K, r, vol, T) + S - K * std::exp(-r * T);
}

// European double-barrier knockout call under GBM: sine-series expansion of
// the killed log-price density, integrated against the payoff.
inline double db_knockout_call(double S, double K, double r, double vol, double T, double L,
                               double U, int terms = 64, int quad = 4000) {
    const double l = std::log(L), u = std::log(U), x0 = std::log(S), w = u - l;
    const double nu = r - 0.5 * vol * vol;
    const double a = std::max(std::log(K), l);
    double price = 0.0;
    for (int q = 0; q < quad; ++q) {
        const double x = a + (q + 0.5) * (u - a) / quad;
        double dens = 0.0;
        for (int n = 1; n <= terms; ++n) {
            dens += std::exp(-0.5 * vol * vol * M_PI * M_PI * n * n * T / (w * w)) *
                    std::sin(n * M_PI * (x0 - l) / w) * std::sin(n * M_PI * (x - l) / w);
        }
        dens *= (2.0 / w) * std::exp(nu * (x - x0) / (vol * vol) - nu * nu * T / (2 * vol * vol));
        price += (std::exp(x) - K) * dens * (u - a) / quad;
    }
    return std::exp(-r * T) * price;
}

}  // namespace oracles
