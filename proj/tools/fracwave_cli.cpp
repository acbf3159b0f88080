#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>

#include "fracwave/runner.hpp"

namespace {

std::string resolve_out(const std::string& out, const std::string& name) {
    if (!out.empty()) return out;
    const char* dir = std::getenv("FRACWAVE_OUT_DIR");
    return (dir != nullptr ? std::string(dir) : std::string(".")) + "/" + name + ".csv";
}

struct SubArgs {
    std::string config;
    std::string out;
};

void add_sub(CLI::App& app, const std::string& name, const std::string& desc, SubArgs& args,
             bool config_required, int& selected, int id) {
    CLI::App* sub = app.add_subcommand(name, desc);
    auto* copt = sub->add_option("--config", args.config, "scenario configuration file");
    if (config_required) copt->required();
    sub->add_option("--out", args.out, "output CSV path (default: $FRACWAVE_OUT_DIR)");
    sub->callback([&selected, id]() { selected = id; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fractional wave controllability experiments"};
    app.require_subcommand(1);

    SubArgs a_specfun, a_gramian, a_linear, a_impulsive, a_cnd, a_terminal;
    int selected = -1;
    add_sub(app, "check-specfun", "special-function spot checks vs classical limits",
            a_specfun, false, selected, 0);
    add_sub(app, "gramian", "controllability Gramian diagonal for the scenario", a_gramian,
            true, selected, 1);
    add_sub(app, "linear-sweep", "lambda sweep of the linear terminal problem", a_linear,
            true, selected, 2);
    add_sub(app, "impulsive-sweep", "lambda sweep of the full semilinear impulsive problem",
            a_impulsive, true, selected, 3);
    add_sub(app, "cnd", "solvability-condition values across the lambda grid", a_cnd, true,
            selected, 4);
    add_sub(app, "terminal-identity", "simulated vs resolvent terminal identity per lambda",
            a_terminal, true, selected, 5);

    CLI11_PARSE(app, argc, argv);

    try {
        fracwave::RunReport report;
        std::string out;
        switch (selected) {
            case 0:
                report = fracwave::run_specfun_report();
                out = resolve_out(a_specfun.out, "check-specfun");
                break;
            case 1:
                report = fracwave::run_gramian_report(fracwave::parse_scenario(a_gramian.config));
                out = resolve_out(a_gramian.out, "gramian");
                break;
            case 2:
                report = fracwave::run_linear_sweep(fracwave::parse_scenario(a_linear.config));
                out = resolve_out(a_linear.out, "linear-sweep");
                break;
            case 3:
                report =
                    fracwave::run_impulsive_sweep(fracwave::parse_scenario(a_impulsive.config));
                out = resolve_out(a_impulsive.out, "impulsive-sweep");
                break;
            case 4:
                report = fracwave::run_cnd_report(fracwave::parse_scenario(a_cnd.config));
                out = resolve_out(a_cnd.out, "cnd");
                break;
            case 5:
                report = fracwave::run_terminal_identity(
                    fracwave::parse_scenario(a_terminal.config));
                out = resolve_out(a_terminal.out, "terminal-identity");
                break;
            default:
                std::cerr << "no subcommand selected\n";
                return 2;
        }
        fracwave::emit_csv(report, out);
        std::cout << out << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
