#include "stoptree/binomial.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace stoptree {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

BinomialLattice build_binomial(const DiffusionModel& model, const Payoff& payoff, int steps) {
    if (steps < 1) throw ConfigError("n", "step count must be >= 1");
    std::string why;
    if (!model.supports_binomial(&why))
        throw ConfigError("model", "binomial scheme assumption violated: " + why);

    BinomialLattice L;
    L.steps = steps;
    L.dt = payoff.maturity() / steps;
    L.sqrt_dt = std::sqrt(L.dt);
    L.root = model.start();

    const double inset = std::cbrt(L.dt);  // barriers pulled in by h^{1/3}
    const double x = L.root;
    const double sq = L.sqrt_dt;

    long lo = -(static_cast<long>(steps) + 1);
    if (model.lower_barrier_finite()) {
        const double target = model.barrier_lo() + inset;
        long k = static_cast<long>(std::floor((target - x) / sq)) + 1;
        while (x + sq * static_cast<double>(k) <= target) ++k;
        lo = std::max(lo, k);
    }
    long hi = static_cast<long>(steps) + 1;
    if (model.upper_barrier_finite()) {
        const double target = model.barrier_hi() - inset;
        long k = static_cast<long>(std::ceil((target - x) / sq)) - 1;
        while (x + sq * static_cast<double>(k) >= target) --k;
        hi = std::min(hi, k);
    }
    if (!(lo < 0 && hi > 0))
        throw ConfigError("n", "no interior grid around the start point; the barriers plus the "
                               "h^(1/3) inset leave no room at this step count");

    L.lo_offset = static_cast<int>(lo);
    L.hi_offset = static_cast<int>(hi);
    L.lower_absorbing = model.lower_barrier_finite() && L.lo_offset >= -steps;
    L.upper_absorbing = model.upper_barrier_finite() && L.hi_offset <= steps;

    const int width = L.hi_offset - L.lo_offset + 1;
    L.alpha_.resize(width);
    L.drift_.resize(width);
    for (int i = 0; i < width; ++i) {
        const double z = L.level(L.lo_offset + i);
        const double sg = model.sigma(z);
        L.alpha_[i] = 0.5 * (sg * sg - 1.0);
        L.drift_[i] = model.mu(z);
    }

    // Every reachable interior state must yield genuine probabilities.
    const int jmin = std::max(L.lo_offset + 1, -(steps - 1));
    const int jmax = std::min(L.hi_offset - 1, steps - 1);
    for (int j = jmin; j <= jmax; ++j) {
        for (int y : {+1, -1}) {
            const double p = L.up_probability(j, y);
            if (!(p >= 0.0 && p <= 1.0)) throw ProbabilityOutOfRange(L.level(j), y, p);
        }
    }
    return L;
}

SolveResult solve_binomial(const BinomialLattice& L, const Payoff& payoff,
                           const SolveOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();
    const int n = L.steps;
    const double h = L.dt;
    const int lo = L.lo_offset, hi = L.hi_offset;
    const int W = hi - lo + 1;

    SolveResult R;
    R.scheme = SchemeKind::binomial;
    R.steps = n;
    R.dt = h;
    R.grid_step = L.sqrt_dt;
    R.root = L.root;
    R.lo_offset = lo;
    R.hi_offset = hi;
    R.memory_count = 2;
    R.boundary_up.assign(n + 1, kNaN);
    R.boundary_dn.assign(n + 1, kNaN);

    std::shared_ptr<std::vector<uint8_t>> stop_store;
    if (options.want_stop_region) {
        const size_t bytes = static_cast<size_t>(n + 1) * W * 2;
        if (bytes > (size_t{1} << 31))
            throw std::invalid_argument("stop region would exceed 2 GiB; solve without it");
        stop_store = std::make_shared<std::vector<uint8_t>>(bytes, uint8_t{0});
    }
    auto stop_slot = [&](int k, int i, int mem_slot) -> uint8_t& {
        return (*stop_store)[(static_cast<size_t>(k) * W + i) * 2 + mem_slot];
    };

    const bool separable = payoff.separable();
    std::vector<double> intrinsic(W, 0.0);
    if (separable)
        for (int i = 0; i < W; ++i) intrinsic[i] = payoff.intrinsic(L.level(lo + i));
    auto payoff_at = [&](int k, int i, double disc) {
        return separable ? disc * intrinsic[i] : payoff(k * h, L.level(lo + i));
    };

    std::vector<double> suffix_lo, suffix_hi;
    if (L.lower_absorbing) suffix_lo = detail::suffix_payoff_max(payoff, L.level(lo), n, h);
    if (L.upper_absorbing) suffix_hi = detail::suffix_payoff_max(payoff, L.level(hi), n, h);

    std::vector<double> cur_up(W, 0.0), cur_dn(W, 0.0), nxt_up(W, 0.0), nxt_dn(W, 0.0);
    std::vector<double> pay_row(W, 0.0);
    std::vector<uint8_t> stopU_row(W, 0), stopD_row(W, 0);

    // Precomputed per-offset pieces of Eq.-style transition ratios.
    std::vector<double> drift_sq(W), inv_den(W);
    for (int i = 0; i < W; ++i) {
        drift_sq[i] = L.sqrt_dt * L.drift_[i];
        inv_den[i] = 1.0 / (1.0 + L.alpha_[i]);
    }

    const bool put_style = payoff.kind() != Payoff::Kind::Call;

    auto record_layer = [&](int k, int jmin, int jmax, bool include_lo_barrier,
                            bool include_hi_barrier) {
        // Boundary of the in-the-money stop block, walked in grid order over
        // the states that exist at this layer (barrier slots plus the parity
        // class of k).
        auto scan = [&](const std::vector<uint8_t>& flags) -> double {
            int best = -1;
            bool streak = true;
            auto visit = [&](int i) {
                if (!streak) return;
                if (!flags[i]) { streak = false; return; }
                if (pay_row[i] > 0.0) best = i;
            };
            if (put_style) {
                if (include_lo_barrier) visit(0);
                for (int j = jmin; j <= jmax && streak; j += 2) visit(j - lo);
            } else {
                if (include_hi_barrier) visit(W - 1);
                for (int j = jmax; j >= jmin && streak; j -= 2) visit(j - lo);
            }
            return best < 0 ? kNaN : L.level(lo + best);
        };
        R.boundary_up[k] = scan(stopU_row);
        R.boundary_dn[k] = scan(stopD_row);

        if (options.want_stop_region) {
            if (include_lo_barrier) {
                stop_slot(k, 0, 0) = stopU_row[0];
                stop_slot(k, 0, 1) = stopD_row[0];
            }
            if (include_hi_barrier) {
                stop_slot(k, W - 1, 0) = stopU_row[W - 1];
                stop_slot(k, W - 1, 1) = stopD_row[W - 1];
            }
            for (int j = jmin; j <= jmax; j += 2) {
                stop_slot(k, j - lo, 0) = stopU_row[j - lo];
                stop_slot(k, j - lo, 1) = stopD_row[j - lo];
            }
        }
        const bool keep = options.want_surface &&
                          (k % std::max(1, options.surface_stride) == 0 || k == n || k == 0);
        if (keep) {
            SurfaceSlice s;
            s.k = k;
            s.t = k * h;
            s.value_up.assign(W, kNaN);
            s.value_dn.assign(W, kNaN);
            s.stop_up.assign(W, 0);
            s.stop_dn.assign(W, 0);
            auto copy_slot = [&](int i) {
                s.value_up[i] = cur_up[i];
                s.value_dn[i] = cur_dn[i];
                s.stop_up[i] = stopU_row[i];
                s.stop_dn[i] = stopD_row[i];
            };
            if (include_lo_barrier) copy_slot(0);
            if (include_hi_barrier) copy_slot(W - 1);
            for (int j = jmin; j <= jmax; j += 2) copy_slot(j - lo);
            R.surface.push_back(std::move(s));
        }
    };

    // Terminal layer: value is f(T, z) everywhere.
    {
        const double disc = separable ? payoff.discount(n * h) : 0.0;
        int jmin = std::max(lo + (L.lower_absorbing ? 1 : 0), -n);
        int jmax = std::min(hi - (L.upper_absorbing ? 1 : 0), n);
        if ((jmin - n) & 1) ++jmin;
        for (int j = jmin; j <= jmax; j += 2) {
            const int i = j - lo;
            const double f = payoff_at(n, i, disc);
            cur_up[i] = cur_dn[i] = pay_row[i] = f;
            stopU_row[i] = stopD_row[i] = 1;
        }
        if (L.lower_absorbing) {
            cur_up[0] = cur_dn[0] = suffix_lo[n];
            pay_row[0] = payoff_at(n, 0, disc);
            stopU_row[0] = stopD_row[0] = 1;
        }
        if (L.upper_absorbing) {
            cur_up[W - 1] = cur_dn[W - 1] = suffix_hi[n];
            pay_row[W - 1] = payoff_at(n, W - 1, disc);
            stopU_row[W - 1] = stopD_row[W - 1] = 1;
        }
        record_layer(n, jmin, jmax, L.lower_absorbing, L.upper_absorbing);
    }

    for (int k = n - 1; k >= 0; --k) {
        std::swap(cur_up, nxt_up);
        std::swap(cur_dn, nxt_dn);
        const double disc = separable ? payoff.discount(k * h) : 0.0;
        int jmin = std::max(lo + 1, -k);
        int jmax = std::min(hi - 1, k);
        if ((jmin - k) & 1) ++jmin;

        for (int j = jmin; j <= jmax; j += 2) {
            const int i = j - lo;
            const double f = payoff_at(k, i, disc);
            const double up_next = nxt_up[i + 1];
            const double dn_next = nxt_dn[i - 1];
            const double ratio_up = (L.alpha_[i - 1] + drift_sq[i]) * inv_den[i];
            const double ratio_dn = (drift_sq[i] - L.alpha_[i + 1]) * inv_den[i];
            const double cont_up = 0.5 * ((1.0 + ratio_up) * up_next + (1.0 - ratio_up) * dn_next);
            const double cont_dn = 0.5 * ((1.0 + ratio_dn) * up_next + (1.0 - ratio_dn) * dn_next);
            cur_up[i] = f >= cont_up ? f : cont_up;
            cur_dn[i] = f >= cont_dn ? f : cont_dn;
            pay_row[i] = f;
            stopU_row[i] = f >= cont_up;
            stopD_row[i] = f >= cont_dn;
        }
        if (L.lower_absorbing) {
            cur_up[0] = cur_dn[0] = suffix_lo[k];
            pay_row[0] = payoff_at(k, 0, disc);
            stopU_row[0] = stopD_row[0] = pay_row[0] >= (k + 1 <= n ? suffix_lo[k + 1] : 0.0);
        }
        if (L.upper_absorbing) {
            cur_up[W - 1] = cur_dn[W - 1] = suffix_hi[k];
            pay_row[W - 1] = payoff_at(k, W - 1, disc);
            stopU_row[W - 1] = stopD_row[W - 1] = pay_row[W - 1] >= (k + 1 <= n ? suffix_hi[k + 1] : 0.0);
        }
        record_layer(k, jmin, jmax, L.lower_absorbing, L.upper_absorbing);
    }

    R.root_value = cur_up[0 - lo];
    if (options.want_stop_region) {
        R.has_stop_region = true;
        R.stop_flags = std::move(stop_store);
    }
    if (options.want_surface) {
        std::reverse(R.surface.begin(), R.surface.end());
    }
    R.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return R;
}

DiscreteStoppingRule stopping_rule(const SolveResult& result) {
    if (result.scheme != SchemeKind::binomial)
        throw std::invalid_argument("stopping_rule: not a binomial solve");
    return DiscreteStoppingRule(result);
}

void write_binomial_surface_csv(const SolveResult& result, std::ostream& out) {
    out << "k,t,z,memory,value,stop\n";
    for (const auto& s : result.surface) {
        for (int i = 0; i < result.width(); ++i) {
            if (std::isnan(s.value_up[i])) continue;
            const double z = result.level(result.lo_offset + i);
            out << s.k << ',' << s.t << ',' << z << ",1," << s.value_up[i] << ','
                << int(s.stop_up[i]) << '\n';
            out << s.k << ',' << s.t << ',' << z << ",-1," << s.value_dn[i] << ','
                << int(s.stop_dn[i]) << '\n';
        }
    }
}

void write_binomial_boundary_csv(const SolveResult& result, const Payoff& payoff,
                                 std::ostream& out) {
    out << "k,t,z,memory,value,stop\n";
    for (int k = 0; k <= result.steps; ++k) {
        const double t = result.time_of(k);
        if (!std::isnan(result.boundary_up[k]))
            out << k << ',' << t << ',' << result.boundary_up[k] << ",1,"
                << payoff(t, result.boundary_up[k]) << ",1\n";
        if (!std::isnan(result.boundary_dn[k]))
            out << k << ',' << t << ',' << result.boundary_dn[k] << ",-1,"
                << payoff(t, result.boundary_dn[k]) << ",1\n";
    }
}

}  // namespace stoptree
