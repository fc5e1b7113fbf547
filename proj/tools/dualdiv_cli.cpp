// dualdiv: solve, verify, simulate and tabulate the dividend problems for a
// spectrally positive Levy model with phase-type jumps.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dualdiv/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;

struct Flags {
    std::string config;
    std::optional<double> sigma, drift, q, phi, dt;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
};

void add_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--sigma", f.sigma, "Gaussian coefficient (replaces the sigma list)");
    cmd->add_option("--drift", f.drift, "drift of the decreasing part");
    cmd->add_option("--q", f.q, "discount rate");
    cmd->add_option("--phi", f.phi, "unit cost of injected capital");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--seed", f.seed, "Monte Carlo seed");
    cmd->add_option("--paths", f.paths, "Monte Carlo path count");
    cmd->add_option("--dt", f.dt, "Euler step for sigma > 0");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dualdiv: optimal dividends in the dual model with phase-type jumps"};
    app.require_subcommand(1);
    Flags flags;
    const std::pair<const char*, dualdiv::Mode> commands[] = {
        {"solve-dividend", dualdiv::Mode::SolveDividend}, {"solve-injection", dualdiv::Mode::SolveInjection},
        {"verify", dualdiv::Mode::Verify},                {"simulate", dualdiv::Mode::Simulate},
        {"figure1", dualdiv::Mode::Figure1},              {"figure2", dualdiv::Mode::Figure2},
    };
    const char* help[] = {
        "optimal barrier a* and v_{a*} on a grid", "optimal barrier b* and the injection value on a grid",
        "variational-inequality checks",          "Monte Carlo estimates against the closed forms",
        "value functions over the drift sweep",   "injection value functions over the cost sweep",
    };
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        subs.push_back(app.add_subcommand(commands[i].first, help[i]));
        add_flags(subs.back(), flags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    dualdiv::Mode mode = dualdiv::Mode::SolveDividend;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) mode = commands[i].second;

    dualdiv::RunConfig cfg;
    try {
        cfg = flags.config.empty() ? dualdiv::parse_config(nlohmann::json::object(), mode)
                                   : dualdiv::parse_config_file(flags.config, mode);
        dualdiv::CliOverrides cli{flags.sigma, flags.drift, flags.q, flags.phi,
                                  flags.out,   flags.seed,  flags.paths, flags.dt};
        dualdiv::finalize_config(cfg, cli);
    } catch (const dualdiv::Error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        const auto outcome = dualdiv::run(cfg, std::cout);
        for (const auto& f : outcome.files) std::cout << "wrote " << f << '\n';
        return outcome.exit_code;
    } catch (const dualdiv::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
}
