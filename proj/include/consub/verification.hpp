#pragma once

#include <string>
#include <vector>

#include "consub/integrate.hpp"
#include "consub/reconstruction.hpp"
#include "consub/state.hpp"
#include "consub/system.hpp"

namespace consub {

struct Metric {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool checked = true;  // informational metrics carry checked = false
};

/// Machine-readable audit result; pass holds iff every checked metric is
/// within its tolerance.
struct AuditReport {
    std::string name;
    bool pass = false;
    std::vector<Metric> metrics;
    std::string config_digest;
    std::vector<std::string> trajectory_digests;
    std::string note;

    void finalize();  // recompute pass from metrics
};

/// Sup-norm distance between two phase curves over their common time window,
/// compared in full (q, p) phase space on a dense-output resampling.
AuditReport check_coincidence(const Trajectory& orig, const Trajectory& subst, double tol,
                              int grid = 1001);

/**
 * Finite demonstration that the shared curve is isolated: each perturbed
 * pair of trajectories (dissipative vs. substitute) must diverge by at
 * least tol_div in sup-norm, while the unperturbed pair coincides. A
 * substitute trajectory that leaves its reconstructed domain counts as
 * diverged from that point on.
 */
AuditReport uniqueness_probe(const SystemDefinition& sys, const SubstituteSystem& substitute,
                             const State& ic, const std::vector<Vec>& perturbations,
                             double tol_div, const IntegratorConfig& dissipative_cfg,
                             const IntegratorConfig& substitute_cfg, double coincidence_tol);

/// Default perturbation set: +/- delta on every phase coordinate, scaled by
/// max(1, |ic component|).
std::vector<Vec> default_perturbations(const State& ic, double delta = 1e-2);

/// Max |Ĥ(q(t), p(t)) − Ĥ(q₀, p₀)| along the original dissipative
/// trajectory, branches resolved per sample time.
AuditReport hamiltonian_constancy(const SubstituteSystem& substitute, const Trajectory& orig,
                                  double tol);

/// Monodromy determinant against the exp(∫ tr Df dt) scalar route.
AuditReport volume_audit(const SystemDefinition& sys, const State& ic, double t_end, double tol,
                         const IntegratorConfig& cfg);
/// Substitute flows additionally assert det = 1 (Liouville).
AuditReport volume_audit(const SubstituteSystem& substitute, const State& ic, double t_end,
                         double tol, const IntegratorConfig& cfg, const BranchSelect& branches = {});

/// Compare the exposed gradient of Ĥ with central finite differences at
/// `sample_count` random in-domain states.
AuditReport gradient_audit(const SubstituteSystem& substitute, int sample_count, unsigned seed,
                           double tol = 1e-5);

} // namespace consub
