#include "stoptree/trinomial.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace stoptree {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// 128-bit hash of the window samples; windows with equal hashes share one
// calibration (the calibration is a pure function of the samples).
std::pair<uint64_t, uint64_t> sample_key(const std::vector<double>& sigma2,
                                         const std::vector<double>& psi, double sigma2_anchor) {
    auto fnv = [](uint64_t h, const double* data, size_t count) {
        for (size_t i = 0; i < count; ++i) {
            uint64_t bits;
            std::memcpy(&bits, &data[i], sizeof bits);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
        return h;
    };
    uint64_t h1 = fnv(0xcbf29ce484222325ULL, sigma2.data(), sigma2.size());
    h1 = fnv(h1, psi.data(), psi.size());
    h1 = fnv(h1, &sigma2_anchor, 1);
    uint64_t h2 = fnv(0x9e3779b97f4a7c15ULL, psi.data(), psi.size());
    h2 = fnv(h2, sigma2.data(), sigma2.size());
    h2 = fnv(h2, &sigma2_anchor, 1);
    return {h1, h2};
}

struct GridChoice {
    double sigma_bar = 0.0;
    double step = 0.0;
    int down = 0, up = 0;
    bool lower_absorbing = false, upper_absorbing = false;
};

GridChoice choose_grid(const DiffusionModel& model, int steps, double sqrt_dt) {
    const auto& b = model.bounds();
    const double base = 1.0001 * (b.sup_abs_sigma + sqrt_dt * b.sup_abs_mu);
    if (!(base > 0.0)) throw ConfigError("model", "sigma vanishes on (B, C)");
    const double base_step = base * sqrt_dt;

    const double x = model.start();
    const bool lo_fin = model.lower_barrier_finite();
    const bool hi_fin = model.upper_barrier_finite();
    const double lo_dist = lo_fin ? x - model.barrier_lo() : kInf;
    const double hi_dist = hi_fin ? model.barrier_hi() - x : kInf;

    GridChoice g;
    auto finish = [&](double step) {
        g.step = step;
        g.sigma_bar = step / sqrt_dt;
        const double lo_ratio = lo_dist / step;
        const double hi_ratio = hi_dist / step;
        g.down = lo_fin ? std::min<long>(steps, static_cast<long>(std::floor(lo_ratio + 1e-9)))
                        : steps;
        g.up = hi_fin ? std::min<long>(steps, static_cast<long>(std::floor(hi_ratio + 1e-9)))
                      : steps;
        g.lower_absorbing = lo_fin && lo_ratio <= steps + 1e-9;
        g.upper_absorbing = hi_fin && hi_ratio <= steps + 1e-9;
        if (g.down < 1 || g.up < 1)
            throw ConfigError("n", "grid step sigma_bar*sqrt(h) is at least min(x-B, C-x); "
                                   "no interior grid at this step count");
    };

    if (!lo_fin && !hi_fin) {
        finish(base_step);
        return g;
    }
    if (lo_fin && !hi_fin) {
        const long m = static_cast<long>(std::floor(lo_dist / base_step));
        if (m < 1) throw ConfigError("n", "sigma_bar*sqrt(h) >= x - B; no interior grid");
        finish(lo_dist / static_cast<double>(m));
        return g;
    }
    if (!lo_fin && hi_fin) {
        const long m = static_cast<long>(std::floor(hi_dist / base_step));
        if (m < 1) throw ConfigError("n", "sigma_bar*sqrt(h) >= C - x; no interior grid");
        finish(hi_dist / static_cast<double>(m));
        return g;
    }

    // Both barriers finite: look for a step that divides both distances
    // exactly, inflating sigma_bar by at most 25%.
    const long jc_max = static_cast<long>(std::floor(hi_dist / base_step));
    if (jc_max < 1) throw ConfigError("n", "sigma_bar*sqrt(h) >= C - x; no interior grid");
    const long jc_min = std::max<long>(1, static_cast<long>(std::ceil(0.8 * jc_max)));
    for (long jc = jc_max; jc >= jc_min; --jc) {
        const double step = hi_dist / static_cast<double>(jc);
        const double ratio = lo_dist / step;
        const long jb = std::llround(ratio);
        if (jb >= 1 && std::abs(ratio - jb) <= 1e-9 * std::max(1.0, ratio)) {
            finish(step);
            return g;
        }
    }
    // No common refinement: match the lower barrier exactly and pull the
    // upper one inward to the nearest grid level.
    const long mb = static_cast<long>(std::floor(lo_dist / base_step));
    if (mb < 1) throw ConfigError("n", "sigma_bar*sqrt(h) >= x - B; no interior grid");
    finish(lo_dist / static_cast<double>(mb));
    return g;
}

}  // namespace

TrinomialLattice build_trinomial(const DiffusionModel& model, const Payoff& payoff, int steps,
                                 CalibrationMode mode) {
    if (steps < 1) throw ConfigError("n", "step count must be >= 1");
    std::string why;
    if (!model.supports_trinomial(&why))
        throw ConfigError("model", "trinomial scheme assumption violated: " + why);

    TrinomialLattice L;
    L.steps = steps;
    L.dt = payoff.maturity() / steps;
    L.root = model.start();
    L.mode = mode;

    const double sqrt_dt = std::sqrt(L.dt);
    const GridChoice g = choose_grid(model, steps, sqrt_dt);
    L.sigma_bar = g.sigma_bar;
    L.grid_step = g.step;
    L.down_count = g.down;
    L.up_count = g.up;
    L.lower_absorbing = g.lower_absorbing;
    L.upper_absorbing = g.upper_absorbing;

    const int width = L.down_count + L.up_count + 1;
    L.calib_.assign(width, NodeCalibration{});

    const int il = std::max(L.interior_lo(), -(steps - 1));
    const int ih = std::min(L.interior_hi(), steps - 1);
    const int cells = 2 * L.cells_per_side;
    const double cell = L.grid_step / L.cells_per_side;

    std::map<std::pair<uint64_t, uint64_t>, NodeCalibration> cache;
    std::vector<double> sigma2(cells), psi(cells);
    for (int i = il; i <= ih; ++i) {
        const double anchor = L.level(i);
        for (int m = 0; m < cells; ++m) {
            const double z = anchor - L.grid_step + (m + 0.5) * cell;
            const double sg = model.sigma(z);
            const double mu = model.mu(z);
            if (!std::isfinite(sg) || sg <= 0.0 || !std::isfinite(mu))
                throw NumericalError("non-finite coefficient in calibration window at z=" +
                                     std::to_string(z));
            sigma2[m] = sg * sg;
            psi[m] = mu / sigma2[m];
        }
        const double s0 = model.sigma(anchor);
        const auto key = sample_key(sigma2, psi, s0 * s0);
        auto it = cache.find(key);
        if (it == cache.end()) {
            const ScaleTable table =
                detail::make_scale_table(anchor, L.grid_step, sigma2, psi, s0 * s0);
            NodeCalibration c = mode == CalibrationMode::bisection
                                    ? calibrate_node(table, L.dt)
                                    : calibrate_node_shortcut(table, L.sigma_bar, L.dt);
            it = cache.emplace(key, c).first;
        }
        L.calib_[i + L.down_count] = it->second;
    }
    L.distinct_calibrations = static_cast<int>(cache.size());
    return L;
}

namespace {

enum class BarrierPolicy { absorbed_american, absorbed_european, knockout_american,
                           knockout_european };

SolveResult solve_impl(const TrinomialLattice& L, const Payoff& payoff,
                       const SolveOptions& options, BarrierPolicy policy) {
    const auto t_start = std::chrono::steady_clock::now();
    const int n = L.steps;
    const double h = L.dt;
    const int down = L.down_count, up = L.up_count;
    const int W = down + up + 1;
    const bool american =
        policy == BarrierPolicy::absorbed_american || policy == BarrierPolicy::knockout_american;
    const bool knockout =
        policy == BarrierPolicy::knockout_american || policy == BarrierPolicy::knockout_european;

    SolveResult R;
    R.scheme = SchemeKind::trinomial;
    R.steps = n;
    R.dt = h;
    R.grid_step = L.grid_step;
    R.root = L.root;
    R.lo_offset = -down;
    R.hi_offset = up;
    R.memory_count = 1;
    R.boundary_up.assign(n + 1, kNaN);

    std::shared_ptr<std::vector<uint8_t>> stop_store;
    if (options.want_stop_region) {
        const size_t bytes = static_cast<size_t>(n + 1) * W;
        if (bytes > (size_t{1} << 31))
            throw std::invalid_argument("stop region would exceed 2 GiB; solve without it");
        stop_store = std::make_shared<std::vector<uint8_t>>(bytes, uint8_t{0});
    }

    const bool separable = payoff.separable();
    std::vector<double> intrinsic(W, 0.0);
    if (separable)
        for (int i = 0; i < W; ++i) intrinsic[i] = payoff.intrinsic(L.level(i - down));
    auto payoff_at = [&](int k, int idx, double disc) {
        return separable ? disc * intrinsic[idx] : payoff(k * h, L.level(idx - down));
    };

    std::vector<double> suffix_lo, suffix_hi;
    if (!knockout) {
        if (L.lower_absorbing)
            suffix_lo = detail::suffix_payoff_max(payoff, L.level(-down), n, h);
        if (L.upper_absorbing)
            suffix_hi = detail::suffix_payoff_max(payoff, L.level(up), n, h);
    }
    const double terminal_lo = payoff(n * h, L.level(-down));
    const double terminal_hi = payoff(n * h, L.level(up));

    std::vector<double> cur(W, 0.0), nxt(W, 0.0);
    std::vector<double> pay_row(W, 0.0);
    std::vector<uint8_t> stop_row(W, 0);
    const bool put_style = payoff.kind() != Payoff::Kind::Call;

    auto barrier_value = [&](int k, bool lower) -> double {
        switch (policy) {
            case BarrierPolicy::absorbed_american: return lower ? suffix_lo[k] : suffix_hi[k];
            case BarrierPolicy::absorbed_european: return lower ? terminal_lo : terminal_hi;
            case BarrierPolicy::knockout_american:
                return payoff(k * h, L.level(lower ? -down : up));
            case BarrierPolicy::knockout_european: return 0.0;
        }
        return 0.0;
    };
    auto barrier_stop = [&](int k, bool lower) -> uint8_t {
        if (!american) return 0;
        if (knockout) return 1;
        const auto& suf = lower ? suffix_lo : suffix_hi;
        return payoff(k * h, L.level(lower ? -down : up)) >= suf[k + 1];
    };

    auto record_layer = [&](int k, int il_k, int ih_k) {
        if (american) {
            int best = -1;
            bool streak = true;
            auto visit = [&](int idx) {
                if (!streak) return;
                if (!stop_row[idx]) { streak = false; return; }
                if (pay_row[idx] > 0.0) best = idx;
            };
            if (put_style) {
                if (L.lower_absorbing && -down >= -k) visit(0);
                for (int i = il_k; i <= ih_k && streak; ++i) visit(i + down);
            } else {
                if (L.upper_absorbing && up <= k) visit(W - 1);
                for (int i = ih_k; i >= il_k && streak; --i) visit(i + down);
            }
            R.boundary_up[k] = best < 0 ? kNaN : L.level(best - down);
        }
        if (options.want_stop_region) {
            auto* s = stop_store->data() + static_cast<size_t>(k) * W;
            if (L.lower_absorbing) s[0] = stop_row[0];
            if (L.upper_absorbing) s[W - 1] = stop_row[W - 1];
            for (int i = il_k; i <= ih_k; ++i) s[i + down] = stop_row[i + down];
        }
        const bool keep = options.want_surface &&
                          (k % std::max(1, options.surface_stride) == 0 || k == n || k == 0);
        if (keep) {
            SurfaceSlice s;
            s.k = k;
            s.t = k * h;
            s.value_up.assign(W, kNaN);
            s.stop_up.assign(W, 0);
            auto copy_slot = [&](int idx) {
                s.value_up[idx] = cur[idx];
                s.stop_up[idx] = stop_row[idx];
            };
            if (L.lower_absorbing) copy_slot(0);
            if (L.upper_absorbing) copy_slot(W - 1);
            for (int i = il_k; i <= ih_k; ++i) copy_slot(i + down);
            R.surface.push_back(std::move(s));
        }
    };

    // Terminal layer: f(T, z) everywhere on the grid.
    {
        const double disc = separable ? payoff.discount(n * h) : 0.0;
        for (int i = -down; i <= up; ++i) {
            const int idx = i + down;
            const double f = payoff_at(n, idx, disc);
            cur[idx] = pay_row[idx] = f;
            stop_row[idx] = 1;
        }
        record_layer(n, L.interior_lo(), L.interior_hi());
    }

    const int il = L.interior_lo();
    const int ih = L.interior_hi();
    for (int k = n - 1; k >= 0; --k) {
        std::swap(cur, nxt);
        const double disc = separable ? payoff.discount(k * h) : 0.0;
        const int il_k = std::max(il, -k);
        const int ih_k = std::min(ih, k);

        for (int i = il_k; i <= ih_k; ++i) {
            const int idx = i + down;
            const double f = payoff_at(k, idx, disc);
            const NodeCalibration& c = L.calib_[idx];
            const double cont =
                c.q_dn * nxt[idx - 1] + c.q_mid * nxt[idx] + c.q_up * nxt[idx + 1];
            if (american) {
                cur[idx] = f >= cont ? f : cont;
                stop_row[idx] = f >= cont;
            } else {
                cur[idx] = cont;
                stop_row[idx] = 0;
            }
            pay_row[idx] = f;
        }
        if (L.lower_absorbing) {
            cur[0] = barrier_value(k, true);
            pay_row[0] = payoff_at(k, 0, disc);
            stop_row[0] = barrier_stop(k, true);
        }
        if (L.upper_absorbing) {
            cur[W - 1] = barrier_value(k, false);
            pay_row[W - 1] = payoff_at(k, W - 1, disc);
            stop_row[W - 1] = barrier_stop(k, false);
        }
        record_layer(k, il_k, ih_k);
    }

    R.root_value = cur[down];
    if (options.want_stop_region) {
        R.has_stop_region = true;
        R.stop_flags = std::move(stop_store);
    }
    if (options.want_surface) std::reverse(R.surface.begin(), R.surface.end());
    R.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return R;
}

}  // namespace

SolveResult solve_trinomial(const TrinomialLattice& lattice, const Payoff& payoff,
                            const SolveOptions& options, bool european) {
    if (payoff.knockout())
        throw ConfigError("payoff.knockout",
                          "knockout payoffs go through solve_trinomial_barrier; mixing a "
                          "knockout with absorbing-barrier semantics is not supported");
    return solve_impl(lattice, payoff, options,
                      european ? BarrierPolicy::absorbed_european
                               : BarrierPolicy::absorbed_american);
}

SolveResult solve_trinomial_barrier(const TrinomialLattice& lattice, const Payoff& payoff,
                                    const SolveOptions& options, bool european) {
    if (!payoff.knockout())
        throw ConfigError("payoff.knockout", "barrier solve needs a knockout payoff");
    if (!lattice.lower_absorbing || !lattice.upper_absorbing)
        throw ConfigError("payoff.knockout", "knockout barriers must be finite lattice barriers");
    const double tol = 1e-9 * lattice.grid_step;
    if (std::abs(payoff.knockout()->first - lattice.barrier_lo_effective()) > tol ||
        std::abs(payoff.knockout()->second - lattice.barrier_hi_effective()) > tol)
        throw ConfigError("payoff.knockout",
                          "knockout barriers do not coincide with lattice grid levels");
    return solve_impl(lattice, payoff, options,
                      european ? BarrierPolicy::knockout_european
                               : BarrierPolicy::knockout_american);
}

DiscreteStoppingRule stopping_rule_trinomial(const SolveResult& result) {
    if (result.scheme != SchemeKind::trinomial)
        throw std::invalid_argument("stopping_rule_trinomial: not a trinomial solve");
    return DiscreteStoppingRule(result);
}

void write_trinomial_surface_csv(const TrinomialLattice& lattice, const SolveResult& result,
                                 std::ostream& out) {
    out << "k,t,z,value,stop,q_up,q_mid,q_dn,A_hat\n";
    for (const auto& s : result.surface) {
        for (int i = 0; i < result.width(); ++i) {
            if (std::isnan(s.value_up[i])) continue;
            const int offset = i + result.lo_offset;
            const auto& c = lattice.calibration(offset);
            out << s.k << ',' << s.t << ',' << result.level(offset) << ',' << s.value_up[i]
                << ',' << int(s.stop_up[i]) << ',' << c.q_up << ',' << c.q_mid << ',' << c.q_dn
                << ',' << c.amplitude << '\n';
        }
    }
}

void write_trinomial_boundary_csv(const TrinomialLattice& lattice, const SolveResult& result,
                                  const Payoff& payoff, std::ostream& out) {
    out << "k,t,z,value,stop,q_up,q_mid,q_dn,A_hat\n";
    for (int k = 0; k <= result.steps; ++k) {
        const double z = result.boundary_up[k];
        if (std::isnan(z)) continue;
        const double t = result.time_of(k);
        const int offset = static_cast<int>(std::llround((z - result.root) / result.grid_step));
        const auto& c = lattice.calibration(offset);
        out << k << ',' << t << ',' << z << ',' << payoff(t, z) << ",1," << c.q_up << ','
            << c.q_mid << ',' << c.q_dn << ',' << c.amplitude << '\n';
    }
}

void write_calibration_csv(const TrinomialLattice& lattice, std::ostream& out) {
    out << "node,X0,A_hat,q_up,q_mid,q_dn,residual\n";
    const int il = lattice.interior_lo();
    const int ih = std::min(lattice.interior_hi(), lattice.steps - 1);
    for (int i = std::max(il, -(lattice.steps - 1)); i <= ih; ++i) {
        const auto& c = lattice.calibration(i);
        out << i << ',' << lattice.level(i) << ',' << c.amplitude << ',' << c.q_up << ','
            << c.q_mid << ',' << c.q_dn << ',' << c.residual << '\n';
    }
}

}  // namespace stoptree
