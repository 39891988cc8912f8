#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "consub/integrate.hpp"
#include "consub/system.hpp"
#include "consub/types.hpp"

namespace consub {

/// Configuration problem: parse failure, unknown key, missing or invalid
/// value, violated family constraint. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Thresholds {
    double eps_turn = 0.0;  // 0 = scale-free default 1e-8 max|q̇ᵢ|
    double eps_div = 0.0;   // 0 = scale-free default 1e-6 max|qᵢ|
    int branch_nodes = 0;   // 0 = library default
    double pad_rel = 0.05;  // evaluation pad, relative to branch range
};

struct Tolerances {
    double coincidence = 1e-6;
    double constancy = 1e-6;
    double gradient = 1e-5;
    double volume = 1e-6;
    double divergence = 1e-3;
    double restriction = 1e-6;
    double energy_rate = 1e-6;
    double identity = 1e-12;
};

struct OutputSpec {
    std::string directory;
    std::vector<std::string> artifacts{"trajectory", "reconstruction", "report", "plots"};
};

/// A fully-specified, reproducible run.
struct RunConfig {
    std::string family;  // drag-1d | coupled-2d | damped-oscillator | linear-ndim
    double c = 1.0;      // drag-1d
    double eta = 0.1;    // damped-oscillator
    double omega = 1.0;
    Mat mass, damping, stiffness;  // linear-ndim (mass optional)

    Vec ic_q, ic_qdot;

    IntegratorConfig integrator;             // dissipative side
    IntegratorConfig substitute_integrator;  // symplectic side
    Thresholds thresholds;
    Tolerances tolerances;
    OutputSpec outputs;
    unsigned seed = 0;

    SystemDefinition build_system() const;
    State initial_state(const SystemDefinition& sys) const;
    /// Canonical serialized form; byte-stable for identical configs.
    std::string canonical_json() const;
    std::string digest() const;
};

/// Parse and validate a config file. Unknown keys are always rejected;
/// strict mode additionally requires every top-level section to be present.
RunConfig parse_config_file(const std::string& path, bool strict = false);
RunConfig parse_config_text(const std::string& text, bool strict = false);

} // namespace consub
