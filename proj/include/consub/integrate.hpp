#pragma once

#include <string>
#include <vector>

#include "consub/reconstruction.hpp"
#include "consub/state.hpp"
#include "consub/system.hpp"

namespace consub {

enum class Method { Rk4Fixed, Rk45Adaptive, StormerVerlet, ImplicitMidpoint };

Method method_from_string(const std::string& name);
std::string to_string(Method method);
bool is_symplectic(Method method);

struct IntegratorConfig {
    Method method = Method::Rk45Adaptive;
    double step = 0.0;       ///< fixed-step methods
    double abs_tol = 1e-12;  ///< adaptive methods
    double rel_tol = 1e-10;
    double t_end = 1.0;
    long max_steps = 50'000'000;
    int samples = 1001;     ///< output grid size over [t0, t_end]
    double max_step = 0.0;  ///< adaptive step cap; 0 = span/50

    void validate() const;
};

/// Integrate the dissipative equations of motion (rk4-fixed or
/// rk45-adaptive), sampling the Hermite dense output on a uniform grid.
Trajectory integrate(const SystemDefinition& sys, const State& ic, const IntegratorConfig& cfg);

/**
 * Integrate the substitute Hamiltonian system with a symplectic scheme
 * (stormer-verlet or implicit-midpoint) on fixed branches.
 *
 * A DomainExit beyond the padded branch domain truncates the trajectory at
 * the last completed step and is reported in meta.note, never silently
 * extrapolated. An exit before the first step propagates the exception.
 */
Trajectory integrate_hamiltonian(const SubstituteSystem& substitute, const State& ic,
                                 const IntegratorConfig& cfg, const BranchSelect& branches = {});

/// Trajectory augmented with the determinant of the state-transition
/// (monodromy) matrix at every sample.
struct MonodromyTrajectory {
    Trajectory base;
    std::vector<double> jacobian_dets;
};

/**
 * Propagate the variational equations alongside the state (rk4-fixed or
 * rk45-adaptive) and report det of the monodromy matrix per sample.
 *
 * The variational block is re-based to the identity at every sample and the
 * determinant accumulated multiplicatively in log space, which keeps the
 * product well-conditioned even for strongly expanding flows.
 */
MonodromyTrajectory integrate_with_monodromy(const SystemDefinition& sys, const State& ic,
                                             const IntegratorConfig& cfg,
                                             bool allow_fd_jacobian = true);
MonodromyTrajectory integrate_with_monodromy(const SubstituteSystem& substitute, const State& ic,
                                             const IntegratorConfig& cfg,
                                             const BranchSelect& branches = {});

/// Cumulative exp(∫ tr Df dt) along a trajectory; the scalar-route oracle
/// for the monodromy determinant (Abel-Jacobi-Liouville).
std::vector<double> trace_determinant_route(const SystemDefinition& sys, const Trajectory& traj,
                                            bool allow_fd_jacobian = true);
std::vector<double> trace_determinant_route(const SubstituteSystem& substitute,
                                            const Trajectory& traj,
                                            const BranchSelect& branches = {});

} // namespace consub
