#include "pspectra/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

int main(int argc, char** argv)
{
    using namespace pspectra;
    CLI::App app{"First p-Laplacian eigenvalues under conformal metrics"};
    app.footer(command_help());
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    int jobs = 1;
    const std::map<std::string, std::string> about{
        {"eigen", "first eigenvalue of one closed, Neumann or Dirichlet problem"},
        {"sweep-eps", "eigenvalue trend along a shrinking-band family of metrics"},
        {"verify-bound", "random unit-volume metrics against the conformal-volume bound"},
        {"reflect", "closed sphere eigenvalue against the hemisphere Neumann eigenvalue"},
        {"dirichlet-scaling", "interval Dirichlet eigenvalues, finite elements vs shooting"},
        {"balance", "balancing Moebius maps and the energy bound they give"}};
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name, about.count(name) ? about.at(name) : "");
        sub->add_option("--config", config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--jobs", jobs, "independent cases run concurrently")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    nlohmann::json config;
    try {
        std::ifstream in(config_path);
        config = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        std::cerr << "pspectra: cannot read " << config_path << ": " << e.what() << '\n';
        return kExitInvalid;
    }

    const auto result = run_command(command, config, {jobs, out_dir, true});
    (result.exit_code == kExitOk ? std::cout : std::cerr) << "pspectra " << command << ": " << result.message << '\n';
    return result.exit_code;
}
