// stoptree: optimal-stopping lattice engine for one-dimensional diffusions.
//
//   stoptree price    --config FILE [--set key=value ...] [--out DIR] [--seed N]
//   stoptree converge --config FILE [--set key=value ...] [--out DIR]
//   stoptree lift     --config FILE [--set key=value ...] [--out DIR] [--seed N]
//   stoptree table    ID [--out DIR]
//
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stoptree/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_config) {
    auto* cfg = cmd->add_option("--config", args.config_path, "run-config TOML file");
    if (need_config) cfg->required();
    cmd->add_option("--set", args.overrides, "override config keys, e.g. --set run.n=4000");
    cmd->add_option("--out", args.out_dir, "output directory for CSV files");
    cmd->add_option("--seed", args.seed, "override the config seed");
}

stoptree::RunConfig load(const CommonArgs& args) {
    stoptree::RunConfig cfg = stoptree::RunConfig::from_file(args.config_path, args.overrides);
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"recombining-tree optimal stopping for one-dimensional diffusions"};
    app.require_subcommand(1);

    CommonArgs price_args, converge_args, lift_args;
    std::string table_id;
    std::string table_out = "out";

    auto* price = app.add_subcommand("price", "solve one lattice and emit surface/boundary CSVs");
    add_common(price, price_args, true);
    auto* converge = app.add_subcommand("converge", "value at several n plus a log-log slope fit");
    add_common(converge, converge_args, true);
    auto* lift = app.add_subcommand("lift", "simulate, embed, and evaluate the lifted policy");
    add_common(lift, lift_args, true);
    auto* table = app.add_subcommand("table", "reproduce a paper experiment table");
    table->add_option("id", table_id, "table id: t2, t4, t5, t6, t8, t9")->required();
    table->add_option("--out", table_out, "output directory for CSV files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (price->parsed()) {
            stoptree::cmd_price(load(price_args), price_args.out_dir, std::cout);
        } else if (converge->parsed()) {
            stoptree::cmd_converge(load(converge_args), converge_args.out_dir, std::cout);
        } else if (lift->parsed()) {
            stoptree::cmd_lift(load(lift_args), lift_args.out_dir, std::cout);
        } else if (table->parsed()) {
            stoptree::cmd_table(table_id, table_out, std::cout);
        }
    } catch (const stoptree::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const stoptree::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
