#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stoptree/model.hpp"
#include "stoptree/path_lab.hpp"
#include "stoptree/trinomial.hpp"

namespace stoptree {

// ---------------------------------------------------------------------------
// Run configuration: TOML file (sections [model], [model.params], [payoff],
// [run], [mc]) plus key=value overrides. Every experiment in the repo ships
// as a checked-in config under configs/.
// ---------------------------------------------------------------------------
struct RunConfig {
    // [model]
    std::string model_kind;  // capped_gbm | absorbed_gbm | cev | cir | regime_switch_vol
    std::map<std::string, double> params;
    double barrier_lo = -kInf;
    double barrier_hi = kInf;
    double start = 0.0;

    // [payoff]
    std::string payoff_kind = "put";  // put | call
    double strike = 0.0;
    double rate = 0.0;
    double maturity = 0.0;
    std::optional<std::pair<double, double>> knockout;

    // [run]
    std::string scheme = "trinomial";  // binomial | trinomial
    int n = 0;
    std::vector<int> n_list;  // converge
    int n_ref = 0;            // converge reference
    std::string calibration_mode = "bisection";  // | lipschitz_shortcut
    bool european = false;
    uint64_t seed = 1;

    // [mc]
    int mc_paths = 100000;
    double mc_dt_factor = 200.0;    // dt_fine = h / dt_factor
    double mc_horizon_factor = 3.0; // initial simulation horizon, extended on demand

    static RunConfig from_file(const std::string& path,
                               const std::vector<std::string>& overrides = {});
    static RunConfig from_flat(const std::map<std::string, std::vector<std::string>>& kv);
    std::string to_toml() const;

    BuiltinModel builtin() const;
    DiffusionModel build_model() const;
    Payoff build_payoff() const;
    CalibrationMode calibration() const;

    /// Field-level validation, including the scheme/model assumption match.
    void validate(bool need_n_list = false, bool need_mc = false) const;
};

// ---------------------------------------------------------------------------
// Commands (the CLI is a thin wrapper over these).
// ---------------------------------------------------------------------------

struct PriceOutput {
    SolveResult result;
    std::string surface_csv, boundary_csv, calibration_csv;  // written files
};
PriceOutput cmd_price(const RunConfig& config, const std::string& out_dir, std::ostream& log);

struct ConvergenceReport {
    int n_ref = 0;
    double reference = 0.0;
    std::vector<int> n_values;
    std::vector<double> values;
    std::vector<double> abs_err;
    std::vector<int> fitted_n;  // entries that passed the noise floor
    bool degenerate = false;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::string csv_path;
};
ConvergenceReport cmd_converge(const RunConfig& config, const std::string& out_dir,
                               std::ostream& log);

struct LiftOutput {
    PolicyEstimate estimate;
    double lattice_value = 0.0;
    std::string csv_path;
};
LiftOutput cmd_lift(const RunConfig& config, const std::string& out_dir, std::ostream& log);

struct TableCase {
    std::string label;
    RunConfig config;
    double paper_value = 0.0;
};
struct TablePreset {
    std::string id;
    std::string caption;
    std::vector<TableCase> cases;
};
/// Presets reproducing the paper's experiment tables (t2, t4, t5, t6, t8, t9).
const std::vector<TablePreset>& table_presets();

struct TableRow {
    std::string label;
    double computed = 0.0;
    double paper = 0.0;
    double rel_dev = 0.0;
    double cpu_seconds = 0.0;
};
std::vector<TableRow> cmd_table(const std::string& table_id, const std::string& out_dir,
                                std::ostream& log);

/// Least-squares fit of log|err| against log n; shared by cmd_converge and
/// the acceptance suite.
struct SlopeFit {
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};
SlopeFit fit_loglog(const std::vector<double>& n_values, const std::vector<double>& abs_err);

/// One solve dispatched on the config's scheme; the workhorse behind the
/// commands. `options` may request stop regions or surfaces.
SolveResult solve_once(const RunConfig& config, int n, const SolveOptions& options = {});

}  // namespace stoptree
