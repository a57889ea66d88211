#include "stoptree/path_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "stoptree/rng.hpp"

namespace stoptree {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kNoFire = std::numeric_limits<int>::min();

// ---- Euler-Maruyama stepper, templated on the coefficient family so the
// per-step cost is a couple of inlined evaluations. Coefficients are
// evaluated at the value clamped into [B, C]; y itself runs free while x is
// the absorbed copy.
template <class CF>
struct FinePath {
    const CF& cf;
    double dt, sqdt, blo, bhi;
    NormalSampler rng;
    long step_index = 0;
    double t = 0.0, y, m, xval;
    bool absorbed = false;

    FinePath(const CF& cf_, double dt_, double blo_, double bhi_, double start, uint64_t stream)
        : cf(cf_), dt(dt_), sqdt(std::sqrt(dt_)), blo(blo_), bhi(bhi_), rng(stream), y(start),
          m(start), xval(start) {}

    void step() {
        const double ye = std::min(std::max(y, blo), bhi);
        const double dm = cf.sigma(ye) * sqdt * rng();
        m += dm;
        y += dm + cf.mu(ye) * dt;
        t = ++step_index * dt;
        if (!absorbed) {
            if (y <= blo) {
                absorbed = true;
                xval = blo;
            } else if (y >= bhi) {
                absorbed = true;
                xval = bhi;
            } else {
                xval = y;
            }
        }
    }
    double x() const { return xval; }
};

// ---- scheme-2 embedding state machine: first reach anchor +- A, then settle
// on the anchor or the neighbouring grid level on the side that was hit.
struct TrinomialEmbedder {
    const TrinomialLattice* L;
    int offset = 0;
    bool frozen = false;
    int stage = 0, side = 0;
    double anchor = 0.0, amp = 0.0;

    explicit TrinomialEmbedder(const TrinomialLattice* lat) : L(lat) {}

    void begin_node() {
        anchor = L->level(offset);
        if ((L->lower_absorbing && offset <= -L->down_count) ||
            (L->upper_absorbing && offset >= L->up_count)) {
            frozen = true;
            return;
        }
        amp = L->calibration(offset).amplitude;
        stage = 0;
        side = 0;
    }

    int feed(double xv) {
        const double d = xv - anchor;
        if (stage == 0) {
            if (d >= amp) {
                stage = 1;
                side = +1;
            } else if (d <= -amp) {
                stage = 1;
                side = -1;
            } else {
                return kNoFire;
            }
        }
        if (side > 0) {
            if (d >= L->grid_step) return +1;
            if (d <= 0.0) return 0;
        } else {
            if (d <= -L->grid_step) return -1;
            if (d >= 0.0) return 0;
        }
        return kNoFire;
    }
};

// ---- scheme-1 embedding: hitting times of the shifted martingale part.
struct BinomialEmbedder {
    const BinomialLattice* L;
    int offset = 0;
    int memory = +1;
    bool frozen = false;
    double m_ref = 0.0, shift = 0.0, level = 0.0;

    explicit BinomialEmbedder(const BinomialLattice* lat) : L(lat) {}

    void begin_node(double m_now) {
        if ((L->lower_absorbing && offset <= L->lo_offset) ||
            (L->upper_absorbing && offset >= L->hi_offset)) {
            frozen = true;
            return;
        }
        m_ref = m_now;
        level = L->sqrt_dt * (1.0 + L->alpha(offset));
        shift = L->sqrt_dt * L->alpha(offset - memory) * memory + L->dt * L->drift(offset);
    }

    int feed(double m_now) {
        const double diff = m_now - m_ref + shift;
        if (diff >= level) return +1;
        if (diff <= -level) return -1;
        return kNoFire;
    }
};

// ---- per-path drivers --------------------------------------------------

// Lifted policy tau* = T ^ theta_{eta*}: run the embedding only as far as the
// rule (or the maturity) needs.
template <class CF, class Embedder, class FeedValue>
double lift_one_path(const CF& cf, const DiffusionModel& model, int steps, double chain_dt,
                     const DiscreteStoppingRule& rule, const Payoff& payoff, double fine_dt,
                     uint64_t stream, Embedder emb, FeedValue&& feed_value,
                     auto&& level_of) {
    const double T = payoff.maturity();
    const long jT = std::llround(T / fine_dt);

    if (rule.should_stop(0, 0, +1)) return payoff(0.0, model.start());

    FinePath<CF> path(cf, fine_dt, model.barrier_lo(), model.barrier_hi(), model.start(),
                      stream);
    emb.begin_node_dispatch(path);

    int k = 0;
    double theta = 0.0;
    double x_at_T = kNaN;
    for (;;) {
        if (emb.frozen) {
            // Frozen chain: embedded clock ticks by h, state stays put.
            while (k < steps) {
                theta += chain_dt;
                ++k;
                if (theta > T) return payoff(T, level_of(emb.offset));
                if (rule.should_stop(k, emb.offset, +1)) return payoff(theta, level_of(emb.offset));
            }
            return payoff(std::min(theta, T), level_of(emb.offset));
        }
        path.step();
        if (path.step_index == jT) x_at_T = path.x();
        const int mv = emb.feed(feed_value(path));
        if (mv != kNoFire) {
            theta = path.t;
            ++k;
            emb.offset += mv;
            emb.set_memory(mv);
            if (theta > T) return payoff(T, x_at_T);
            if (k >= steps || rule.should_stop(k, emb.offset, emb.memory_value()))
                return payoff(theta, level_of(emb.offset));
            emb.begin_node_dispatch(path);
        } else if (path.step_index >= jT) {
            return payoff(T, x_at_T);
        }
    }
}

}  // namespace

// The two embedders differ in what they watch and whether they carry memory;
// small adaptors give them one face for the shared driver.
namespace {

struct TrinomialAdaptor : TrinomialEmbedder {
    using TrinomialEmbedder::TrinomialEmbedder;
    template <class P>
    void begin_node_dispatch(const P&) { begin_node(); }
    void set_memory(int) {}
    int memory_value() const { return +1; }
};

struct BinomialAdaptor : BinomialEmbedder {
    using BinomialEmbedder::BinomialEmbedder;
    template <class P>
    void begin_node_dispatch(const P& path) { begin_node(path.m); }
    void set_memory(int mv) { memory = mv; }
    int memory_value() const { return memory; }
};

// Runs fn(path_index) over [0, count) with per-path outputs; thread count is
// capped by STOPTREE_THREADS. Outputs are indexed, so the reduction is
// deterministic regardless of the thread count.
template <class Fn>
void parallel_paths(int count, Fn&& fn) {
    const int threads = std::min(resolve_threads(), count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < count; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

PolicyEstimate reduce_estimate(const std::vector<double>& payoffs, double dt, uint64_t seed,
                               int steps) {
    PolicyEstimate est;
    est.dt = dt;
    est.seed = seed;
    est.steps = steps;
    double sum = 0.0, sumsq = 0.0;
    for (double v : payoffs) {
        if (std::isnan(v)) {
            ++est.paths_excluded;
            continue;
        }
        ++est.paths_used;
        sum += v;
        sumsq += v * v;
    }
    if (est.paths_used > 0) {
        est.mean = sum / est.paths_used;
        if (est.paths_used > 1) {
            const double var =
                std::max(0.0, (sumsq - sum * sum / est.paths_used) / (est.paths_used - 1));
            est.stderr_mean = std::sqrt(var / est.paths_used);
        }
    }
    return est;
}

}  // namespace

PathBundle::PathBundle(DiffusionModel model, double horizon, double dt, int count, uint64_t seed)
    : model_(std::move(model)), horizon_(horizon), dt_(dt), count_(count), seed_(seed) {
    if (count < 1) throw ConfigError("mc.paths", "path count must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("mc.dt_fine", "fine step must be positive");
    if (!(horizon > 0.0)) throw ConfigError("mc.horizon", "horizon must be positive");
}

PathBundle simulate_paths(const DiffusionModel& model, double horizon, double dt, int count,
                          uint64_t seed) {
    return PathBundle(model, horizon, dt, count, seed);
}

PathBundle::Trajectory PathBundle::trajectory(int path_index) const {
    Trajectory out;
    const long steps = std::llround(horizon_ / dt_);
    out.t.reserve(steps + 1);
    out.y.reserve(steps + 1);
    out.x.reserve(steps + 1);
    out.m.reserve(steps + 1);
    const uint64_t stream = path_stream_seed(seed_, static_cast<uint64_t>(path_index));
    std::visit(
        [&](const auto& cf) {
            FinePath path(cf, dt_, model_.barrier_lo(), model_.barrier_hi(), model_.start(),
                          stream);
            auto push = [&] {
                out.t.push_back(path.t);
                out.y.push_back(path.y);
                out.x.push_back(path.x());
                out.m.push_back(path.m);
            };
            push();
            for (long j = 0; j < steps; ++j) {
                const bool was_absorbed = path.absorbed;
                path.step();
                if (path.absorbed && !was_absorbed) {
                    out.absorbed = true;
                    out.absorption_time = path.t;
                }
                push();
            }
        },
        model_.coeffs());
    return out;
}

namespace {

// Full embedding of one path up to `steps` embedded times; gives up past the
// time cap and marks the trace incomplete.
template <class CF, class Adaptor, class FeedValue>
EmbeddingTrace trace_one_path(const CF& cf, const DiffusionModel& model, int steps,
                              double chain_dt, double maturity, double fine_dt, double time_cap,
                              uint64_t stream, Adaptor emb, FeedValue&& feed_value,
                              SchemeKind scheme, double root, double grid_step) {
    EmbeddingTrace tr;
    tr.scheme = scheme;
    tr.maturity = maturity;
    tr.times.reserve(steps + 1);
    tr.offsets.reserve(steps + 1);
    tr.times.push_back(0.0);
    tr.offsets.push_back(0);
    if (scheme == SchemeKind::binomial) tr.memories.push_back(+1);
    tr.value_at_T = kNaN;

    FinePath<CF> path(cf, fine_dt, model.barrier_lo(), model.barrier_hi(), model.start(),
                      stream);
    emb.begin_node_dispatch(path);
    const long jT = std::llround(maturity / fine_dt);

    int k = 0;
    double theta = 0.0;
    while (k < steps) {
        if (emb.frozen) {
            theta += chain_dt;
            ++k;
            tr.times.push_back(theta);
            tr.offsets.push_back(emb.offset);
            if (scheme == SchemeKind::binomial) tr.memories.push_back(int8_t(emb.memory_value()));
            continue;
        }
        path.step();
        if (path.step_index == jT) tr.value_at_T = path.x();
        const int mv = emb.feed(feed_value(path));
        if (mv != kNoFire) {
            theta = path.t;
            ++k;
            emb.offset += mv;
            emb.set_memory(mv);
            tr.times.push_back(theta);
            tr.offsets.push_back(emb.offset);
            if (scheme == SchemeKind::binomial) tr.memories.push_back(int8_t(emb.memory_value()));
            if (k < steps) emb.begin_node_dispatch(path);
        } else if (path.t > time_cap) {
            tr.complete = false;
            break;
        }
    }
    // Make sure the maturity snapshot exists even if all embeddings fired
    // early.
    if (std::isnan(tr.value_at_T)) {
        while (path.step_index < jT) path.step();
        tr.value_at_T = path.x();
    }
    // Trace offsets are grid offsets; remember the grid so the lifted payoff
    // can recover levels without the lattice.
    tr.root = root;
    tr.grid_step = grid_step;
    return tr;
}

}  // namespace

std::vector<EmbeddingTrace> embed_binomial(const PathBundle& bundle,
                                           const BinomialLattice& lattice, double maturity,
                                           double give_up_factor) {
    std::vector<EmbeddingTrace> traces(bundle.count());
    std::visit(
        [&](const auto& cf) {
            parallel_paths(bundle.count(), [&](int i) {
                traces[i] = trace_one_path(
                    cf, bundle.model(), lattice.steps, lattice.dt, maturity, bundle.dt(),
                    give_up_factor * std::max(maturity, lattice.steps * lattice.dt),
                    path_stream_seed(bundle.seed(), i), BinomialAdaptor(&lattice),
                    [](const auto& p) { return p.m; }, SchemeKind::binomial, lattice.root,
                    lattice.sqrt_dt);
            });
        },
        bundle.model().coeffs());
    return traces;
}

std::vector<EmbeddingTrace> embed_trinomial(const PathBundle& bundle,
                                            const TrinomialLattice& lattice, double maturity,
                                            double give_up_factor) {
    std::vector<EmbeddingTrace> traces(bundle.count());
    std::visit(
        [&](const auto& cf) {
            parallel_paths(bundle.count(), [&](int i) {
                traces[i] = trace_one_path(
                    cf, bundle.model(), lattice.steps, lattice.dt, maturity, bundle.dt(),
                    give_up_factor * std::max(maturity, lattice.steps * lattice.dt),
                    path_stream_seed(bundle.seed(), i), TrinomialAdaptor(&lattice),
                    [](const auto& p) { return p.x(); }, SchemeKind::trinomial, lattice.root,
                    lattice.grid_step);
            });
        },
        bundle.model().coeffs());
    return traces;
}

double lifted_payoff(const EmbeddingTrace& trace, const DiscreteStoppingRule& rule,
                     const Payoff& payoff) {
    const double T = payoff.maturity();
    const int K = static_cast<int>(trace.times.size()) - 1;
    for (int k = 0; k <= K; ++k) {
        const double theta = trace.times[k];
        const int offset = trace.offsets[k];
        const int mem = trace.memories.empty() ? +1 : trace.memories[k];
        if (theta > T) return payoff(T, trace.value_at_T);
        if (k >= rule.steps() || rule.should_stop(k, offset, mem))
            return payoff(theta, trace.root + offset * trace.grid_step);
    }
    throw EmbeddingIncomplete(0, K, rule.steps());
}

PolicyEstimate evaluate_lifted_policy(const std::vector<EmbeddingTrace>& traces,
                                      const DiscreteStoppingRule& rule, const Payoff& payoff) {
    std::vector<double> payoffs(traces.size(), kNaN);
    for (size_t i = 0; i < traces.size(); ++i) {
        try {
            payoffs[i] = lifted_payoff(traces[i], rule, payoff);
        } catch (const EmbeddingIncomplete&) {
            // excluded, counted by the reduction
        }
    }
    return reduce_estimate(payoffs, 0.0, 0, rule.steps());
}

PolicyEstimate lift_binomial(const DiffusionModel& model, const BinomialLattice& lattice,
                             const DiscreteStoppingRule& rule, const Payoff& payoff,
                             const McParams& mc) {
    std::vector<double> payoffs(mc.paths, kNaN);
    std::visit(
        [&](const auto& cf) {
            parallel_paths(mc.paths, [&](int i) {
                payoffs[i] = lift_one_path(
                    cf, model, lattice.steps, lattice.dt, rule, payoff, mc.dt,
                    path_stream_seed(mc.seed, i), BinomialAdaptor(&lattice),
                    [](const auto& p) { return p.m; },
                    [&](int offset) { return lattice.level(offset); });
            });
        },
        model.coeffs());
    return reduce_estimate(payoffs, mc.dt, mc.seed, lattice.steps);
}

PolicyEstimate lift_trinomial(const DiffusionModel& model, const TrinomialLattice& lattice,
                              const DiscreteStoppingRule& rule, const Payoff& payoff,
                              const McParams& mc) {
    std::vector<double> payoffs(mc.paths, kNaN);
    std::visit(
        [&](const auto& cf) {
            parallel_paths(mc.paths, [&](int i) {
                payoffs[i] = lift_one_path(
                    cf, model, lattice.steps, lattice.dt, rule, payoff, mc.dt,
                    path_stream_seed(mc.seed, i), TrinomialAdaptor(&lattice),
                    [](const auto& p) { return p.x(); },
                    [&](int offset) { return lattice.level(offset); });
            });
        },
        model.coeffs());
    return reduce_estimate(payoffs, mc.dt, mc.seed, lattice.steps);
}

namespace {

struct StatsAccumulator {
    double sum_inc = 0.0, sumsq_inc = 0.0;
    long n_inc = 0;
    double sum_max = 0.0, sumsq_max = 0.0;
    int used = 0, excluded = 0;
};

template <class MakeTrace>
EmbeddingStats run_stats(int paths, MakeTrace&& make_trace, double chain_dt) {
    std::vector<double> max_drift(paths, kNaN);
    std::vector<double> inc_sum(paths, 0.0), inc_sumsq(paths, 0.0);
    std::vector<long> inc_count(paths, 0);

    parallel_paths(paths, [&](int i) {
        const EmbeddingTrace tr = make_trace(i);
        if (!tr.complete) return;
        double mx = 0.0;
        for (size_t k = 1; k < tr.times.size(); ++k) {
            const double d = tr.times[k] - tr.times[k - 1];
            inc_sum[i] += d;
            inc_sumsq[i] += d * d;
            ++inc_count[i];
            mx = std::max(mx, std::abs(tr.times[k] - double(k) * chain_dt));
        }
        max_drift[i] = mx;
    });

    StatsAccumulator acc;
    for (int i = 0; i < paths; ++i) {
        if (std::isnan(max_drift[i])) {
            ++acc.excluded;
            continue;
        }
        ++acc.used;
        acc.sum_inc += inc_sum[i];
        acc.sumsq_inc += inc_sumsq[i];
        acc.n_inc += inc_count[i];
        acc.sum_max += max_drift[i];
        acc.sumsq_max += max_drift[i] * max_drift[i];
    }

    EmbeddingStats st;
    st.paths_used = acc.used;
    st.paths_excluded = acc.excluded;
    st.increments = acc.n_inc;
    if (acc.n_inc > 1) {
        st.mean_increment = acc.sum_inc / acc.n_inc;
        const double var = std::max(
            0.0, (acc.sumsq_inc - acc.sum_inc * acc.sum_inc / acc.n_inc) / (acc.n_inc - 1));
        st.stderr_increment = std::sqrt(var / acc.n_inc);
    }
    if (acc.used > 1) {
        st.mean_max_drift = acc.sum_max / acc.used;
        const double var = std::max(
            0.0, (acc.sumsq_max - acc.sum_max * acc.sum_max / acc.used) / (acc.used - 1));
        st.stderr_max_drift = std::sqrt(var / acc.used);
    }
    return st;
}

}  // namespace

EmbeddingStats embedding_stats_binomial(const DiffusionModel& model,
                                        const BinomialLattice& lattice, const Payoff& payoff,
                                        const McParams& mc) {
    EmbeddingStats st;
    std::visit(
        [&](const auto& cf) {
            st = run_stats(
                mc.paths,
                [&](int i) {
                    return trace_one_path(
                        cf, model, lattice.steps, lattice.dt, payoff.maturity(), mc.dt,
                        mc.give_up_factor * std::max(payoff.maturity(), lattice.steps * lattice.dt),
                        path_stream_seed(mc.seed, i), BinomialAdaptor(&lattice),
                        [](const auto& p) { return p.m; }, SchemeKind::binomial, lattice.root,
                        lattice.sqrt_dt);
                },
                lattice.dt);
        },
        model.coeffs());
    return st;
}

EmbeddingStats embedding_stats_trinomial(const DiffusionModel& model,
                                         const TrinomialLattice& lattice, const Payoff& payoff,
                                         const McParams& mc) {
    EmbeddingStats st;
    std::visit(
        [&](const auto& cf) {
            st = run_stats(
                mc.paths,
                [&](int i) {
                    return trace_one_path(
                        cf, model, lattice.steps, lattice.dt, payoff.maturity(), mc.dt,
                        mc.give_up_factor * std::max(payoff.maturity(), lattice.steps * lattice.dt),
                        path_stream_seed(mc.seed, i), TrinomialAdaptor(&lattice),
                        [](const auto& p) { return p.x(); }, SchemeKind::trinomial, lattice.root,
                        lattice.grid_step);
                },
                lattice.dt);
        },
        model.coeffs());
    return st;
}

IncrementSample sample_trinomial_increment(const DiffusionModel& model, double anchor,
                                           double amplitude, double grid_step, double dt,
                                           int paths, uint64_t seed) {
    std::vector<double> times(paths, 0.0);
    std::vector<int8_t> moves(paths, 0);
    std::visit(
        [&](const auto& cf) {
            parallel_paths(paths, [&](int i) {
                FinePath path(cf, dt, model.barrier_lo(), model.barrier_hi(), anchor,
                              path_stream_seed(seed, i));
                int stage = 0, side = 0;
                for (long guard = 0; guard < (1L << 34); ++guard) {
                    path.step();
                    const double d = path.x() - anchor;
                    if (stage == 0) {
                        if (d >= amplitude) {
                            stage = 1;
                            side = +1;
                        } else if (d <= -amplitude) {
                            stage = 1;
                            side = -1;
                        } else {
                            continue;
                        }
                    }
                    if (side > 0) {
                        if (d >= grid_step) { moves[i] = +1; break; }
                        if (d <= 0.0) { moves[i] = 0; break; }
                    } else {
                        if (d <= -grid_step) { moves[i] = -1; break; }
                        if (d >= 0.0) { moves[i] = 0; break; }
                    }
                }
                times[i] = path.t;
            });
        },
        model.coeffs());

    IncrementSample out;
    out.samples = paths;
    double sum = 0.0, sumsq = 0.0;
    int up = 0, dn = 0, mid = 0;
    for (int i = 0; i < paths; ++i) {
        sum += times[i];
        sumsq += times[i] * times[i];
        if (moves[i] > 0) ++up;
        else if (moves[i] < 0) ++dn;
        else ++mid;
    }
    out.freq_up = double(up) / paths;
    out.freq_dn = double(dn) / paths;
    out.freq_mid = double(mid) / paths;
    out.mean_time = sum / paths;
    const double var = std::max(0.0, (sumsq - sum * sum / paths) / (paths - 1));
    out.stderr_time = std::sqrt(var / paths);
    return out;
}

BinarySample sample_binomial_increment(const DiffusionModel& model,
                                       const BinomialLattice& lattice, int offset, int memory,
                                       double dt, int paths, uint64_t seed) {
    const double z = lattice.level(offset);
    const double level = lattice.sqrt_dt * (1.0 + lattice.alpha(offset));
    const double shift =
        lattice.sqrt_dt * lattice.alpha(offset - memory) * memory + lattice.dt * lattice.drift(offset);

    std::vector<double> times(paths, 0.0);
    std::vector<int8_t> moves(paths, 0);
    std::visit(
        [&](const auto& cf) {
            parallel_paths(paths, [&](int i) {
                FinePath path(cf, dt, model.barrier_lo(), model.barrier_hi(), z,
                              path_stream_seed(seed, i));
                const double m0 = path.m;
                for (;;) {
                    path.step();
                    const double diff = path.m - m0 + shift;
                    if (diff >= level) { moves[i] = +1; break; }
                    if (diff <= -level) { moves[i] = -1; break; }
                }
                times[i] = path.t;
            });
        },
        model.coeffs());

    BinarySample out;
    out.samples = paths;
    double sum = 0.0, sumsq = 0.0;
    int up = 0;
    for (int i = 0; i < paths; ++i) {
        sum += times[i];
        sumsq += times[i] * times[i];
        if (moves[i] > 0) ++up;
    }
    out.freq_up = double(up) / paths;
    out.mean_time = sum / paths;
    const double var = std::max(0.0, (sumsq - sum * sum / paths) / (paths - 1));
    out.stderr_time = std::sqrt(var / paths);
    return out;
}

}  // namespace stoptree
