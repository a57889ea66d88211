#include "stoptree/model.hpp"

#include <cstdlib>
#include <thread>

namespace stoptree {

int resolve_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("STOPTREE_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

namespace {

double eval_mu(const Coeffs& c, double s) {
    return std::visit([s](const auto& m) { return m.mu(s); }, c);
}

double eval_sigma(const Coeffs& c, double s) {
    return std::visit([s](const auto& m) { return m.sigma(s); }, c);
}

// Finite clip of (B,C) used for bound sampling when a barrier is infinite.
std::pair<double, double> sampling_range(double lo, double hi, double start) {
    const double span = 512.0 * std::max(1.0, std::abs(start));
    const double a = std::isfinite(lo) ? lo : start - span;
    const double b = std::isfinite(hi) ? hi : start + span;
    return {a, b};
}

}  // namespace

DiffusionModel::DiffusionModel(Coeffs coeffs, double barrier_lo, double barrier_hi, double start,
                               int bound_samples)
    : coeffs_(std::move(coeffs)),
      barrier_lo_(barrier_lo),
      barrier_hi_(barrier_hi),
      start_(start) {
    if (!(barrier_lo_ < barrier_hi_))
        throw ConfigError("barrier_lo", "barriers must satisfy B < C");
    if (!(barrier_lo_ < start_ && start_ < barrier_hi_))
        throw ConfigError("start", "start must lie strictly inside (B, C)");

    // Dense midpoint sampling over a fixed partition: deterministic, so two
    // models built from the same inputs carry bitwise-identical bounds.
    auto [a, b] = sampling_range(barrier_lo_, barrier_hi_, start_);
    bounds_.sample_lo = a;
    bounds_.sample_hi = b;
    const double cell = (b - a) / bound_samples;
    for (int i = 0; i < bound_samples; ++i) {
        const double s = a + (i + 0.5) * cell;
        const double m = eval_mu(coeffs_, s);
        const double v = eval_sigma(coeffs_, s);
        if (!std::isfinite(m) || !std::isfinite(v))
            throw NumericalError("non-finite coefficient sampled at s=" + std::to_string(s));
        bounds_.sup_abs_mu = std::max(bounds_.sup_abs_mu, std::abs(m));
        bounds_.sup_abs_sigma = std::max(bounds_.sup_abs_sigma, std::abs(v));
        bounds_.inf_sigma = std::min(bounds_.inf_sigma, v);
    }
}

double DiffusionModel::mu(double s) const { return eval_mu(coeffs_, s); }
double DiffusionModel::sigma(double s) const { return eval_sigma(coeffs_, s); }

void DiffusionModel::declare_lipschitz(double lip_mu, double lip_sigma) {
    lip_mu_ = lip_mu;
    lip_sigma_ = lip_sigma;
}

bool DiffusionModel::supports_binomial(std::string* why) const {
    if (bounds_.inf_sigma <= 0.0) {
        if (why) *why = "sigma is not bounded away from zero on (B, C)";
        return false;
    }
    if (!lip_mu_ || !lip_sigma_) {
        if (why) *why = "mu, sigma carry no Lipschitz constants on (B, C)";
        return false;
    }
    return true;
}

bool DiffusionModel::supports_trinomial(std::string* why) const {
    if (bounds_.inf_sigma <= 0.0) {
        if (why) *why = "1/sigma is not bounded on (B, C)";
        return false;
    }
    if (!std::isfinite(bounds_.sup_abs_mu) || !std::isfinite(bounds_.sup_abs_sigma)) {
        if (why) *why = "mu or sigma is unbounded on (B, C)";
        return false;
    }
    return true;
}

DiffusionModel make_builtin(const BuiltinModel& spec, double barrier_lo, double barrier_hi,
                            double start) {
    return std::visit(
        [&](const auto& m) -> DiffusionModel {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, CappedGbm>) {
                if (!(m.drift_floor <= m.drift_cap) || !(m.vol_floor <= m.vol_cap))
                    throw ConfigError("model.params", "capped GBM needs floor <= cap");
                if (m.vol_floor <= 0.0)
                    throw ConfigError("model.params", "capped GBM needs a positive vol floor");
                DiffusionModel out(Coeffs{m}, barrier_lo, barrier_hi, start);
                out.declare_lipschitz(1.0, 1.0);
                return out;
            } else if constexpr (std::is_same_v<M, AbsorbedGbm>) {
                DiffusionModel out(Coeffs{m}, barrier_lo, barrier_hi, start);
                out.declare_lipschitz(1.0, 1.0);
                return out;
            } else if constexpr (std::is_same_v<M, Cev>) {
                if (m.beta > 0.0)
                    throw ConfigError("model.params.beta", "CEV requires beta <= 0");
                if (m.delta <= 0.0)
                    throw ConfigError("model.params.delta", "CEV requires delta > 0");
                if (barrier_lo <= 0.0)
                    throw ConfigError("model.barrier_lo",
                                      "CEV requires a positive lower barrier; sigma or 1/sigma "
                                      "is unbounded near 0 for beta < 0");
                DiffusionModel out(Coeffs{m}, barrier_lo, barrier_hi, start);
                // |sigma'| = |delta (beta+1) s^beta| decreases in s for beta <= 0.
                const double lip_sigma =
                    m.beta == 0.0 ? m.delta
                                  : std::abs(m.delta * (m.beta + 1.0) * std::pow(barrier_lo, m.beta));
                out.declare_lipschitz(m.r, lip_sigma);
                return out;
            } else if constexpr (std::is_same_v<M, Cir>) {
                if (m.vol <= 0.0)
                    throw ConfigError("model.params.vol", "CIR requires vol > 0");
                if (barrier_lo <= 0.0)
                    throw ConfigError("model.barrier_lo",
                                      "CIR requires a positive lower barrier (sqrt domain)");
                DiffusionModel out(Coeffs{m}, barrier_lo, barrier_hi, start);
                out.declare_lipschitz(m.reversion, m.vol / (2.0 * std::sqrt(barrier_lo)));
                return out;
            } else {
                static_assert(std::is_same_v<M, RegimeSwitchVol>);
                if (m.sigma1 <= 0.0 || m.sigma2 <= 0.0)
                    throw ConfigError("model.params", "regime volatilities must be positive");
                if (barrier_lo <= 0.0)
                    throw ConfigError("model.barrier_lo",
                                      "regime-switch model requires a positive lower barrier");
                DiffusionModel out(Coeffs{m}, barrier_lo, barrier_hi, start);
                // Discontinuous sigma: no Lipschitz declaration, trinomial only.
                if (m.sigma1 == m.sigma2) out.declare_lipschitz(m.r, m.sigma1);
                return out;
            }
        },
        spec);
}

double perpetual_bs_boundary(double r, double strike, double delta) {
    if (r <= 0.0) throw ConfigError("r", "perpetual boundary needs r > 0");
    if (strike < 0.0) throw ConfigError("strike", "perpetual boundary needs K >= 0");
    if (delta <= 0.0) throw ConfigError("delta", "perpetual boundary needs delta > 0");
    return 2.0 * r * strike / (2.0 * r + delta * delta);
}

Payoff Payoff::put(double strike, double rate, double maturity) {
    if (strike < 0.0) throw ConfigError("payoff.strike", "strike must be nonnegative");
    if (maturity <= 0.0) throw ConfigError("payoff.maturity", "maturity must be positive");
    Payoff p;
    p.kind_ = Kind::Put;
    p.strike_ = strike;
    p.rate_ = rate;
    p.maturity_ = maturity;
    p.lipschitz_ = std::max(rate * strike + 1.0, 1.0);
    return p;
}

Payoff Payoff::call(double strike, double rate, double maturity) {
    Payoff p = put(strike, rate, maturity);
    p.kind_ = Kind::Call;
    return p;
}

Payoff Payoff::custom(std::function<double(double, double)> f, double maturity,
                      double lipschitz) {
    if (maturity <= 0.0) throw ConfigError("payoff.maturity", "maturity must be positive");
    Payoff p;
    p.kind_ = Kind::Custom;
    p.maturity_ = maturity;
    p.lipschitz_ = lipschitz;
    p.fn_ = std::move(f);
    return p;
}

Payoff Payoff::with_knockout(double lo, double hi) const {
    if (!(lo < hi)) throw ConfigError("payoff.knockout", "knockout needs lo < hi");
    Payoff p = *this;
    p.knockout_ = {lo, hi};
    return p;
}

double Payoff::operator()(double t, double x) const {
    if (kind_ == Kind::Custom) return fn_(t, x);
    return discount(t) * intrinsic(x);
}

}  // namespace stoptree
