#pragma once

#include "pspectra/conformal.hpp"
#include "pspectra/mesh.hpp"
#include "pspectra/psolve.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pspectra {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitNotConverged = 2, kExitCheckFailed = 3 };

struct RunOptions {
    int jobs = 1;
    std::string out_dir = ".";
    bool write_files = true;
};

struct CommandResult {
    int exit_code = kExitOk;
    nlohmann::json results;
    std::string csv;     // rows.csv body without the timestamp line
    std::string message; // one-line summary
};

const std::vector<std::string>& command_names();

/// Column documentation for every command's rows.csv.
std::string command_help();

/// Runs one experiment. Validation and I/O problems surface as exit code 1
/// with the message set; nothing is thrown.
CommandResult run_command(const std::string& command, const nlohmann::json& config, const RunOptions& opts);

// Building blocks shared with the tests.
DiscreteManifold mesh_from_config(const nlohmann::json& spec);
ConformalFactor factor_from_config(const DiscreteManifold& mesh, const nlohmann::json& spec);
SolveOptions solver_from_config(const nlohmann::json& spec, double p);

/// Well-mixed sub-seed for case `index` of a batch.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure
/// (lowest index).
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// exp(kappa <x, c>) on a sphere mesh: a smooth density concentrated in the
/// cap around c.
ConformalFactor cap_density(const DiscreteManifold& mesh, const Vec3& center, double kappa);

} // namespace pspectra
