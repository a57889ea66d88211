#include "stoptree/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "stoptree/binomial.hpp"

namespace stoptree {

namespace {

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Flat key/value view of the config with consumption tracking, so unknown
// keys become field-level errors.
class KvReader {
public:
    explicit KvReader(const std::map<std::string, std::vector<std::string>>& kv) : kv_(kv) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        auto vals = take(key);
        if (!vals) return fallback;
        if (vals->size() != 1) throw ConfigError(key, "expected a single value");
        return vals->front();
    }

    double get_double(const std::string& key, double fallback) {
        auto vals = take(key);
        if (!vals) return fallback;
        if (vals->size() != 1) throw ConfigError(key, "expected a single number");
        return parse_double(key, vals->front());
    }

    long get_long(const std::string& key, long fallback) {
        const double v = get_double(key, double(fallback));
        return std::llround(v);
    }

    bool get_bool(const std::string& key, bool fallback) {
        auto vals = take(key);
        if (!vals) return fallback;
        const std::string& s = vals->front();
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError(key, "expected true/false");
    }

    std::vector<double> get_doubles(const std::string& key) {
        auto vals = take(key);
        if (!vals) return {};
        std::vector<double> out;
        for (const auto& s : *vals) out.push_back(parse_double(key, s));
        return out;
    }

    /// All unconsumed keys under a section prefix, as name -> number.
    std::map<std::string, double> take_section_doubles(const std::string& prefix) {
        std::map<std::string, double> out;
        for (const auto& [key, vals] : kv_) {
            if (key.rfind(prefix, 0) != 0) continue;
            if (consumed_.count(key)) continue;
            if (vals.size() != 1) throw ConfigError(key, "expected a single number");
            out[key.substr(prefix.size())] = parse_double(key, vals.front());
            consumed_.insert(key);
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, vals] : kv_)
            if (!consumed_.count(key)) throw ConfigError(key, "unknown key");
    }

private:
    static double parse_double(const std::string& key, const std::string& s) {
        try {
            size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key, "cannot parse number from '" + s + "'");
        }
    }

    const std::vector<std::string>* take(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return nullptr;
        consumed_.insert(key);
        return &it->second;
    }

    const std::map<std::string, std::vector<std::string>>& kv_;
    std::set<std::string> consumed_;
};

}  // namespace

RunConfig RunConfig::from_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");

    std::map<std::string, std::vector<std::string>> flat;
    CLI::ConfigTOML parser;
    try {
        for (const auto& item : parser.from_config(in)) flat[item.fullname()] = item.inputs;
    } catch (const CLI::Error& e) {
        throw ConfigError("config", std::string("parse failure: ") + e.what());
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set", "override must look like section.key=value: '" + ov + "'");
        const std::string key = ov.substr(0, eq);
        std::vector<std::string> vals;
        std::stringstream ss(ov.substr(eq + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(tok);
        if (vals.empty()) vals.push_back("");
        flat[key] = vals;
    }
    return from_flat(flat);
}

RunConfig RunConfig::from_flat(const std::map<std::string, std::vector<std::string>>& kv) {
    KvReader r(kv);
    RunConfig c;

    c.model_kind = r.get_string("model.model", "");
    if (c.model_kind.empty()) throw ConfigError("model.model", "model kind is required");
    c.barrier_lo = r.get_double("model.barrier_lo", -kInf);
    c.barrier_hi = r.get_double("model.barrier_hi", kInf);
    c.start = r.get_double("model.start", std::numeric_limits<double>::quiet_NaN());
    if (!std::isfinite(c.start)) throw ConfigError("model.start", "start point is required");
    c.params = r.take_section_doubles("model.params.");

    c.payoff_kind = r.get_string("payoff.kind", "put");
    c.strike = r.get_double("payoff.strike", 0.0);
    c.rate = r.get_double("payoff.rate", 0.0);
    c.maturity = r.get_double("payoff.maturity", 0.0);
    const auto ko = r.get_doubles("payoff.knockout");
    if (!ko.empty()) {
        if (ko.size() != 2) throw ConfigError("payoff.knockout", "expected [lo, hi]");
        c.knockout = {ko[0], ko[1]};
    }

    c.scheme = r.get_string("run.scheme", "trinomial");
    c.n = static_cast<int>(r.get_long("run.n", 0));
    for (double v : r.get_doubles("run.n_list")) c.n_list.push_back(int(std::llround(v)));
    c.n_ref = static_cast<int>(r.get_long("run.n_ref", 0));
    c.calibration_mode = r.get_string("run.calibration_mode", "bisection");
    c.european = r.get_bool("run.european", false);
    c.seed = static_cast<uint64_t>(r.get_long("run.seed", 1));

    c.mc_paths = static_cast<int>(r.get_long("mc.paths", 100000));
    c.mc_dt_factor = r.get_double("mc.dt_factor", 200.0);
    c.mc_horizon_factor = r.get_double("mc.horizon_factor", 3.0);

    r.finish();
    return c;
}

std::string RunConfig::to_toml() const {
    std::ostringstream out;
    out << "[model]\n";
    out << "model = \"" << model_kind << "\"\n";
    if (std::isfinite(barrier_lo)) out << "barrier_lo = " << num17(barrier_lo) << "\n";
    if (std::isfinite(barrier_hi)) out << "barrier_hi = " << num17(barrier_hi) << "\n";
    out << "start = " << num17(start) << "\n";
    if (!params.empty()) {
        out << "\n[model.params]\n";
        for (const auto& [k, v] : params) out << k << " = " << num17(v) << "\n";
    }
    out << "\n[payoff]\n";
    out << "kind = \"" << payoff_kind << "\"\n";
    out << "strike = " << num17(strike) << "\n";
    out << "rate = " << num17(rate) << "\n";
    out << "maturity = " << num17(maturity) << "\n";
    if (knockout)
        out << "knockout = [" << num17(knockout->first) << ", " << num17(knockout->second)
            << "]\n";
    out << "\n[run]\n";
    out << "scheme = \"" << scheme << "\"\n";
    if (n > 0) out << "n = " << n << "\n";
    if (!n_list.empty()) {
        out << "n_list = [";
        for (size_t i = 0; i < n_list.size(); ++i) out << (i ? ", " : "") << n_list[i];
        out << "]\n";
    }
    if (n_ref > 0) out << "n_ref = " << n_ref << "\n";
    out << "calibration_mode = \"" << calibration_mode << "\"\n";
    out << "european = " << (european ? "true" : "false") << "\n";
    out << "seed = " << seed << "\n";
    out << "\n[mc]\n";
    out << "paths = " << mc_paths << "\n";
    out << "dt_factor = " << num17(mc_dt_factor) << "\n";
    out << "horizon_factor = " << num17(mc_horizon_factor) << "\n";
    return out.str();
}

namespace {

double need_param(const std::map<std::string, double>& params, const char* name,
                  const char* model) {
    auto it = params.find(name);
    if (it == params.end())
        throw ConfigError(std::string("model.params.") + name,
                          std::string("required by model '") + model + "'");
    return it->second;
}

void reject_extra_params(const std::map<std::string, double>& params,
                         std::initializer_list<const char*> known, const char* model) {
    for (const auto& [k, v] : params) {
        bool ok = false;
        for (const char* name : known)
            if (k == name) ok = true;
        if (!ok)
            throw ConfigError("model.params." + k,
                              std::string("unknown parameter for model '") + model + "'");
    }
}

}  // namespace

BuiltinModel RunConfig::builtin() const {
    const auto& p = params;
    if (model_kind == "capped_gbm") {
        reject_extra_params(p, {"drift_cap", "drift_floor", "vol_cap", "vol_floor"}, "capped_gbm");
        CappedGbm m;
        m.drift_cap = p.count("drift_cap") ? p.at("drift_cap") : 10.0;
        m.drift_floor = p.count("drift_floor") ? p.at("drift_floor") : 2.0;
        m.vol_cap = p.count("vol_cap") ? p.at("vol_cap") : 10.0;
        m.vol_floor = p.count("vol_floor") ? p.at("vol_floor") : 2.0;
        return m;
    }
    if (model_kind == "absorbed_gbm") {
        reject_extra_params(p, {}, "absorbed_gbm");
        return AbsorbedGbm{};
    }
    if (model_kind == "cev") {
        reject_extra_params(p, {"r", "delta", "beta"}, "cev");
        return Cev{need_param(p, "r", "cev"), need_param(p, "delta", "cev"),
                   need_param(p, "beta", "cev")};
    }
    if (model_kind == "cir") {
        reject_extra_params(p, {"drift_const", "reversion", "vol"}, "cir");
        return Cir{need_param(p, "drift_const", "cir"), need_param(p, "reversion", "cir"),
                   need_param(p, "vol", "cir")};
    }
    if (model_kind == "regime_switch_vol") {
        reject_extra_params(p, {"r", "sigma1", "sigma2", "threshold"}, "regime_switch_vol");
        return RegimeSwitchVol{need_param(p, "r", "regime_switch_vol"),
                               need_param(p, "sigma1", "regime_switch_vol"),
                               need_param(p, "sigma2", "regime_switch_vol"),
                               need_param(p, "threshold", "regime_switch_vol")};
    }
    throw ConfigError("model.model", "unknown model kind '" + model_kind + "'");
}

DiffusionModel RunConfig::build_model() const {
    double lo = barrier_lo, hi = barrier_hi;
    if (knockout) {
        // The knockout lattice is built with the barriers at (L, U).
        if (std::isfinite(lo) && lo != knockout->first)
            throw ConfigError("model.barrier_lo", "must equal the lower knockout level");
        if (std::isfinite(hi) && hi != knockout->second)
            throw ConfigError("model.barrier_hi", "must equal the upper knockout level");
        lo = knockout->first;
        hi = knockout->second;
    }
    return make_builtin(builtin(), lo, hi, start);
}

Payoff RunConfig::build_payoff() const {
    Payoff p = [&] {
        if (payoff_kind == "put") return Payoff::put(strike, rate, maturity);
        if (payoff_kind == "call") return Payoff::call(strike, rate, maturity);
        throw ConfigError("payoff.kind", "expected put or call, got '" + payoff_kind + "'");
    }();
    if (knockout) p = p.with_knockout(knockout->first, knockout->second);
    return p;
}

CalibrationMode RunConfig::calibration() const {
    if (calibration_mode == "bisection") return CalibrationMode::bisection;
    if (calibration_mode == "lipschitz_shortcut") return CalibrationMode::lipschitz_shortcut;
    throw ConfigError("run.calibration_mode", "expected bisection or lipschitz_shortcut");
}

void RunConfig::validate(bool need_n_list, bool need_mc) const {
    if (scheme != "binomial" && scheme != "trinomial")
        throw ConfigError("run.scheme", "expected binomial or trinomial");
    if (maturity <= 0.0) throw ConfigError("payoff.maturity", "must be positive");
    if (need_n_list) {
        if (n_list.size() < 3)
            throw ConfigError("run.n_list", "convergence study needs at least 3 step counts");
        if (n_ref <= 0) throw ConfigError("run.n_ref", "convergence study needs a reference n");
        for (int v : n_list)
            if (v < 1) throw ConfigError("run.n_list", "step counts must be >= 1");
    } else {
        if (n < 1) throw ConfigError("run.n", "step count must be >= 1");
    }
    if (need_mc) {
        if (mc_paths < 1) throw ConfigError("mc.paths", "path count must be >= 1");
        if (mc_dt_factor < 100.0)
            throw ConfigError("mc.dt_factor", "fine step must be at most h/100");
    }
    if (knockout && scheme == "binomial")
        throw ConfigError("payoff.knockout", "barrier options run on the trinomial scheme");
    if (european && scheme == "binomial")
        throw ConfigError("run.european", "the european flag applies to the trinomial scheme");
    (void)calibration();

    // Model/payoff/scheme compatibility, checked before any solving starts.
    const DiffusionModel model = build_model();
    (void)build_payoff();
    std::string why;
    if (scheme == "binomial" && !model.supports_binomial(&why))
        throw ConfigError("model", "binomial scheme assumption violated: " + why);
    if (scheme == "trinomial" && !model.supports_trinomial(&why))
        throw ConfigError("model", "trinomial scheme assumption violated: " + why);
}

SolveResult solve_once(const RunConfig& config, int n, const SolveOptions& options) {
    const DiffusionModel model = config.build_model();
    const Payoff payoff = config.build_payoff();
    if (config.scheme == "binomial") {
        const BinomialLattice lattice = build_binomial(model, payoff, n);
        return solve_binomial(lattice, payoff, options);
    }
    const TrinomialLattice lattice = build_trinomial(model, payoff, n, config.calibration());
    if (payoff.knockout())
        return solve_trinomial_barrier(lattice, payoff, options, config.european);
    return solve_trinomial(lattice, payoff, options, config.european);
}

namespace {

std::filesystem::path prepare_out_dir(const std::string& out_dir) {
    std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("--out", "cannot create directory '" + dir.string() + "'");
    return dir;
}

}  // namespace

PriceOutput cmd_price(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
    config.validate();
    const auto dir = prepare_out_dir(out_dir);

    SolveOptions options;
    options.want_surface = true;
    options.surface_stride = std::max(1, config.n / 20);

    const DiffusionModel model = config.build_model();
    const Payoff payoff = config.build_payoff();

    PriceOutput out;
    if (config.scheme == "binomial") {
        const BinomialLattice lattice = build_binomial(model, payoff, config.n);
        out.result = solve_binomial(lattice, payoff, options);
        out.surface_csv = (dir / "price_surface.csv").string();
        out.boundary_csv = (dir / "price_boundary.csv").string();
        std::ofstream s(out.surface_csv);
        write_binomial_surface_csv(out.result, s);
        std::ofstream b(out.boundary_csv);
        write_binomial_boundary_csv(out.result, payoff, b);
    } else {
        const TrinomialLattice lattice =
            build_trinomial(model, payoff, config.n, config.calibration());
        out.result = payoff.knockout()
                         ? solve_trinomial_barrier(lattice, payoff, options, config.european)
                         : solve_trinomial(lattice, payoff, options, config.european);
        out.surface_csv = (dir / "price_surface.csv").string();
        out.boundary_csv = (dir / "price_boundary.csv").string();
        out.calibration_csv = (dir / "calibration.csv").string();
        std::ofstream s(out.surface_csv);
        write_trinomial_surface_csv(lattice, out.result, s);
        std::ofstream b(out.boundary_csv);
        write_trinomial_boundary_csv(lattice, out.result, payoff, b);
        std::ofstream c(out.calibration_csv);
        write_calibration_csv(lattice, c);
    }
    log << "root value " << num17(out.result.root_value) << " (scheme " << config.scheme
        << ", n=" << config.n << ", wall " << out.result.wall_seconds << "s)\n";
    return out;
}

SlopeFit fit_loglog(const std::vector<double>& n_values, const std::vector<double>& abs_err) {
    SlopeFit fit;
    const size_t m = n_values.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < m; ++i) {
        const double lx = std::log(n_values[i]);
        const double ly = std::log(abs_err[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    const double denom = m * sxx - sx * sx;
    fit.slope = (m * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / m;
    const double ss_tot = syy - sy * sy / m;
    double ss_res = 0;
    for (size_t i = 0; i < m; ++i) {
        const double pred = fit.intercept + fit.slope * std::log(n_values[i]);
        const double res = std::log(abs_err[i]) - pred;
        ss_res += res * res;
    }
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

ConvergenceReport cmd_converge(const RunConfig& config, const std::string& out_dir,
                               std::ostream& log) {
    config.validate(/*need_n_list=*/true);
    const auto dir = prepare_out_dir(out_dir);

    ConvergenceReport rep;
    rep.n_ref = config.n_ref;
    log << "reference solve n=" << config.n_ref << "...\n";
    rep.reference = solve_once(config, config.n_ref).root_value;
    log << "reference value " << num17(rep.reference) << "\n";

    for (int n : config.n_list) {
        const double v = solve_once(config, n).root_value;
        rep.n_values.push_back(n);
        rep.values.push_back(v);
        rep.abs_err.push_back(std::abs(rep.reference - v));
        log << "n=" << n << " value " << num17(v) << " abs_err " << rep.abs_err.back() << "\n";
    }

    const double floor = 10.0 * std::numeric_limits<double>::epsilon() * std::abs(rep.reference);
    std::vector<double> fx, fy;
    for (size_t i = 0; i < rep.n_values.size(); ++i) {
        if (rep.abs_err[i] > floor) {
            rep.fitted_n.push_back(rep.n_values[i]);
            fx.push_back(rep.n_values[i]);
            fy.push_back(rep.abs_err[i]);
        }
    }
    if (fx.size() < 2) {
        rep.degenerate = true;
        log << "degenerate regression: errors sit at the noise floor; no fit\n";
    } else {
        const SlopeFit fit = fit_loglog(fx, fy);
        rep.slope = fit.slope;
        rep.intercept = fit.intercept;
        rep.r_squared = fit.r_squared;
        log << "fitted slope " << fit.slope << " (intercept " << fit.intercept << ", R^2 "
            << fit.r_squared << ")\n";
    }

    rep.csv_path = (dir / "converge.csv").string();
    std::ofstream csv(rep.csv_path);
    csv << "n,value,abs_err,log_n,log_err\n";
    for (size_t i = 0; i < rep.n_values.size(); ++i) {
        csv << rep.n_values[i] << ',' << num17(rep.values[i]) << ',' << num17(rep.abs_err[i])
            << ',' << num17(std::log(double(rep.n_values[i]))) << ','
            << (rep.abs_err[i] > 0 ? num17(std::log(rep.abs_err[i])) : "-inf") << '\n';
    }
    return rep;
}

LiftOutput cmd_lift(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
    config.validate(/*need_n_list=*/false, /*need_mc=*/true);
    const auto dir = prepare_out_dir(out_dir);

    const DiffusionModel model = config.build_model();
    const Payoff payoff = config.build_payoff();
    SolveOptions options;
    options.want_stop_region = true;

    LiftOutput out;
    McParams mc;
    mc.paths = config.mc_paths;
    mc.seed = config.seed;
    mc.dt = (payoff.maturity() / config.n) / config.mc_dt_factor;

    if (config.scheme == "binomial") {
        const BinomialLattice lattice = build_binomial(model, payoff, config.n);
        const SolveResult solved = solve_binomial(lattice, payoff, options);
        out.lattice_value = solved.root_value;
        const DiscreteStoppingRule rule = stopping_rule(solved);
        out.estimate = lift_binomial(model, lattice, rule, payoff, mc);
    } else {
        if (payoff.knockout())
            throw ConfigError("payoff.knockout", "lift runs on plain optimal stopping only");
        const TrinomialLattice lattice =
            build_trinomial(model, payoff, config.n, config.calibration());
        const SolveResult solved = solve_trinomial(lattice, payoff, options);
        out.lattice_value = solved.root_value;
        const DiscreteStoppingRule rule = stopping_rule_trinomial(solved);
        out.estimate = lift_trinomial(model, lattice, rule, payoff, mc);
    }

    out.csv_path = (dir / "lift.csv").string();
    std::ofstream csv(out.csv_path);
    csv << "n,paths,estimate,stderr,excluded_paths,dt_fine,seed\n";
    csv << config.n << ',' << out.estimate.paths_used << ',' << num17(out.estimate.mean) << ','
        << num17(out.estimate.stderr_mean) << ',' << out.estimate.paths_excluded << ','
        << num17(mc.dt) << ',' << config.seed << '\n';

    log << "lattice value " << num17(out.lattice_value) << ", lifted estimate "
        << num17(out.estimate.mean) << " +- " << num17(out.estimate.stderr_mean) << " ("
        << out.estimate.paths_used << " paths, " << out.estimate.paths_excluded
        << " excluded)\n";
    return out;
}

// ---------------------------------------------------------------------------
// Paper-table presets.
// ---------------------------------------------------------------------------
namespace {

RunConfig capped_gbm_put(const std::string& scheme, int n) {
    RunConfig c;
    c.model_kind = "capped_gbm";
    c.params = {{"drift_cap", 10.0}, {"drift_floor", 2.0}, {"vol_cap", 10.0}, {"vol_floor", 2.0}};
    c.start = 4.0;
    c.payoff_kind = "put";
    c.strike = 4.0;
    c.rate = 0.1;
    c.maturity = 0.5;
    c.scheme = scheme;
    if (scheme == "trinomial") c.calibration_mode = "lipschitz_shortcut";
    c.n = n;
    return c;
}

RunConfig cev_put(const std::string& scheme, double strike, double beta, int n) {
    RunConfig c;
    c.model_kind = "cev";
    c.params = {{"r", 0.05}, {"delta", 0.2 * std::pow(100.0, -beta)}, {"beta", beta}};
    c.barrier_lo = 0.01;
    c.barrier_hi = 200.0;
    c.start = 100.0;
    c.payoff_kind = "put";
    c.strike = strike;
    c.rate = 0.05;
    c.maturity = 0.5;
    c.scheme = scheme;
    if (scheme == "trinomial") c.calibration_mode = "lipschitz_shortcut";
    c.n = n;
    return c;
}

RunConfig cir_put(const std::string& scheme, double strike, int n) {
    RunConfig c;
    c.model_kind = "cir";
    c.params = {{"drift_const", 2.0}, {"reversion", 0.5}, {"vol", 2.0}};
    c.barrier_lo = 0.01;
    c.barrier_hi = 200.0;
    c.start = 40.0;
    c.payoff_kind = "put";
    c.strike = strike;
    c.rate = 0.1;
    c.maturity = 0.5;
    c.scheme = scheme;
    if (scheme == "trinomial") c.calibration_mode = "lipschitz_shortcut";
    c.n = n;
    return c;
}

RunConfig capped_barrier_call(double strike, double beta, int n, bool european) {
    RunConfig c;
    c.model_kind = "cev";
    c.params = {{"r", 0.1}, {"delta", 0.25 * std::pow(100.0, -beta)}, {"beta", beta}};
    c.start = 100.0;
    c.payoff_kind = "call";
    c.strike = strike;
    c.rate = 0.1;
    c.maturity = 0.5;
    c.knockout = std::make_pair(90.0, 120.0);
    c.barrier_lo = 90.0;
    c.barrier_hi = 120.0;
    c.scheme = "trinomial";
    c.calibration_mode = "lipschitz_shortcut";
    c.european = european;
    c.n = n;
    return c;
}

std::string fmt_label(const char* fmt, double a, double b = 0.0) {
    char buf[96];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    return buf;
}

std::vector<TablePreset> make_presets() {
    std::vector<TablePreset> out;

    {
        TablePreset t;
        t.id = "t2";
        t.caption = "American put under capped GBM, both schemes";
        const double paper1[] = {0.5954, 0.6042, 0.6079, 0.6100, 0.6114, 0.6124};
        const double paper2[] = {0.6213, 0.6213, 0.6214, 0.6216, 0.6216, 0.6216};
        for (int i = 0; i < 6; ++i) {
            const int n = 1000 * (i + 1);
            t.cases.push_back({"scheme1 n=" + std::to_string(n), capped_gbm_put("binomial", n),
                               paper1[i]});
            t.cases.push_back({"scheme2 n=" + std::to_string(n), capped_gbm_put("trinomial", n),
                               paper2[i]});
        }
        out.push_back(std::move(t));
    }
    {
        TablePreset t;
        t.id = "t4";
        t.caption = "American puts under CEV, scheme 1";
        struct Row { double strike, beta, paper; };
        const Row rows[] = {{90, -1, 1.4373},  {90, -1.0 / 3, 1.3040},
                            {100, -1, 4.5359}, {100, -1.0 / 3, 4.5244},
                            {110, -1, 10.6502}, {110, -1.0 / 3, 10.7716}};
        for (const auto& r : rows)
            t.cases.push_back({fmt_label("K=%.0f beta=%.4g", r.strike, r.beta),
                               cev_put("binomial", r.strike, r.beta, 15000), r.paper});
        out.push_back(std::move(t));
    }
    {
        TablePreset t;
        t.id = "t5";
        t.caption = "American puts under CEV, scheme 2";
        struct Row { double strike, beta, paper; };
        const Row rows[] = {{90, -1, 1.5123},  {90, -1.0 / 3, 1.3845},
                            {100, -1, 4.6392}, {100, -1.0 / 3, 4.6492},
                            {110, -1, 10.7517}, {110, -1.0 / 3, 10.8943}};
        for (const auto& r : rows)
            t.cases.push_back({fmt_label("K=%.0f beta=%.4g", r.strike, r.beta),
                               cev_put("trinomial", r.strike, r.beta, 15000), r.paper});
        out.push_back(std::move(t));
    }
    {
        TablePreset t;
        t.id = "t6";
        t.caption = "American puts under CIR, both schemes";
        const double paper1[] = {4.4654, 8.1285, 12.4498};
        const double paper2[] = {4.5223, 8.1932, 12.5167};
        const double strikes[] = {35, 40, 45};
        for (int i = 0; i < 3; ++i) {
            t.cases.push_back({fmt_label("scheme1 K=%.0f", strikes[i]),
                               cir_put("binomial", strikes[i], 30000), paper1[i]});
            t.cases.push_back({fmt_label("scheme2 K=%.0f", strikes[i]),
                               cir_put("trinomial", strikes[i], 30000), paper2[i]});
        }
        out.push_back(std::move(t));
    }
    {
        TablePreset t;
        t.id = "t8";
        t.caption = "Double capped barrier calls under CEV, European";
        struct Row { double strike, beta, paper; int n; };
        const Row rows[] = {{95, -0.5, 1.9012, 2000}, {95, 0, 1.7197, 2000},
                            {95, -2, 2.5970, 5000},   {95, -3, 3.2717, 2000},
                            {100, -0.5, 1.1090, 2000}, {100, 0, 0.9802, 2000},
                            {100, -2, 1.6101, 5000},  {100, -3, 2.0958, 2000},
                            {105, -0.5, 0.5201, 2000}, {105, 0, 0.4473, 2000},
                            {105, -2, 0.8142, 5000},  {105, -3, 1.1072, 2000}};
        for (const auto& r : rows)
            t.cases.push_back({fmt_label("K=%.0f beta=%.4g", r.strike, r.beta),
                               capped_barrier_call(r.strike, r.beta, r.n, true), r.paper});
        out.push_back(std::move(t));
    }
    {
        TablePreset t;
        t.id = "t9";
        t.caption = "Double capped barrier calls under CEV, American";
        struct Row { double strike, beta, paper; };
        const Row rows[] = {{95, -0.5, 9.8470}, {95, 0, 9.8271},  {95, -2, 9.9826},
                            {95, -3, 10.0586}, {100, -0.5, 7.4546}, {100, 0, 7.4522},
                            {100, -2, 7.5118}, {100, -3, 7.5203}, {105, -0.5, 5.2612},
                            {105, 0, 5.2788},  {105, -2, 5.2345}, {105, -3, 5.1669}};
        for (const auto& r : rows)
            t.cases.push_back({fmt_label("K=%.0f beta=%.4g", r.strike, r.beta),
                               capped_barrier_call(r.strike, r.beta, 2000, false), r.paper});
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

const std::vector<TablePreset>& table_presets() {
    static const std::vector<TablePreset> presets = make_presets();
    return presets;
}

std::vector<TableRow> cmd_table(const std::string& table_id, const std::string& out_dir,
                                std::ostream& log) {
    const TablePreset* preset = nullptr;
    for (const auto& t : table_presets())
        if (t.id == table_id) preset = &t;
    if (!preset)
        throw ConfigError("table", "unknown table id '" + table_id +
                                       "' (available: t2, t4, t5, t6, t8, t9)");

    const auto dir = prepare_out_dir(out_dir);
    std::vector<TableRow> rows;
    for (const auto& c : preset->cases) {
        c.config.validate();
        const SolveResult r = solve_once(c.config, c.config.n);
        TableRow row;
        row.label = c.label;
        row.computed = r.root_value;
        row.paper = c.paper_value;
        row.rel_dev = (r.root_value - c.paper_value) / c.paper_value;
        row.cpu_seconds = r.wall_seconds;
        rows.push_back(row);
        log << table_id << " " << c.label << ": computed " << num17(r.root_value) << " paper "
            << c.paper_value << " rel_dev " << row.rel_dev << " (wall " << r.wall_seconds
            << "s)\n";
    }

    std::ofstream csv((dir / ("table_" + table_id + ".csv")).string());
    csv << "label,computed,paper,rel_dev,cpu_seconds\n";
    for (const auto& r : rows)
        csv << '"' << r.label << "\"," << num17(r.computed) << ',' << r.paper << ','
            << num17(r.rel_dev) << ',' << r.cpu_seconds << '\n';
    return rows;
}

}  // namespace stoptree
