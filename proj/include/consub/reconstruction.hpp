#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "consub/interpolation.hpp"
#include "consub/state.hpp"
#include "consub/system.hpp"

namespace consub {

/// Per-coordinate branch choice when evaluating multi-branch objects.
/// Empty means branch 0 everywhere.
using BranchSelect = std::vector<int>;

/// Query left the reconstructed domain (outside every branch plus its pad).
class DomainExit : public std::domain_error {
public:
    DomainExit(int coord, int branch, double query, double lo, double hi);

    int coord = 0;
    int branch = 0;       ///< nearest branch
    double query = 0.0;
    double lo = 0.0, hi = 0.0;  ///< nearest branch domain
};

/// Coordinate has no monotone piece at all (identically constant).
class DegenerateCoordinateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Velocity threshold leaves no usable monotone window.
class ThresholdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maximal time window on which one coordinate is strictly monotone,
/// sampled uniformly in time from the dense output.
struct MonotoneSegment {
    int coord = 0;
    int branch_id = 0;
    bool increasing = true;
    double t_a = 0.0, t_b = 0.0;
    Vec t_samples, q_samples, qdot_samples;
    std::shared_ptr<const DenseOutput> dense;

    double q_min() const;
    double q_max() const;
};

/**
 * Segment a trajectory into strictly monotone pieces of coordinate `coord`.
 *
 * Turning points are roots of q̇ᵢ located by sign change plus bisection on
 * the dense output; each segment excludes the neighborhood where
 * |q̇ᵢ| <= eps_turn. eps_turn <= 0 selects the default 1e-8 * max|q̇ᵢ|;
 * nodes <= 0 selects the default per-branch sample count.
 */
std::vector<MonotoneSegment> segment_monotone(const Trajectory& traj, int coord,
                                              double eps_turn = 0.0, int nodes = 0);

/**
 * One monotone piece of the phase curve with its inverse time map.
 *
 * `seed` is the shape-preserving interpolant of t against qᵢ; time_of()
 * polishes the seed with safeguarded Newton iterations on the dense output,
 * which keeps the inversion accurate arbitrarily close to turning points.
 */
struct BranchCurve {
    int coord = 0;
    int branch_id = 0;
    bool increasing = true;
    double t_lo = 0.0, t_hi = 0.0;
    double q_lo = 0.0, q_hi = 0.0;
    Vec t_nodes, q_nodes, qdot_nodes;
    Pchip seed;  // t as a function of q
    std::shared_ptr<const DenseOutput> dense;

    double time_of(double q) const;
    double seed_time_of(double q) const { return seed(q); }
};

BranchCurve make_branch_curve(const MonotoneSegment& segment);

/// Inverse map t(qᵢ) on one monotone segment.
struct InverseMap {
    MonotoneSegment segment;
    BranchCurve curve;

    double time_of(double q) const { return curve.time_of(q); }
    const Pchip& interpolant() const { return curve.seed; }
    double q_min() const { return curve.q_lo; }
    double q_max() const { return curve.q_hi; }
    /// max |qᵢ(t(q)) − q| over the tabulated nodes (refined inversion).
    double round_trip_error() const;
};

InverseMap build_inverse_map(const MonotoneSegment& segment);

/**
 * One branch of the restricted force 𝓕ᵢ(qᵢ) = Fᵢ(q(t(qᵢ)), q̇(t(qᵢ))).
 *
 * Tabulated on the branch grid with a shape-preserving interpolant as the
 * fast seed; value() re-evaluates the exact force law at the refined
 * inverse time, so the restriction identity holds to solver precision even
 * next to turning points. Queries inside `pad` beyond the tabulated range
 * use the boundary linear extension; beyond that, DomainExit.
 */
struct ForceBranch {
    BranchCurve curve;
    Vec force_nodes;
    Pchip force_seed;   // 𝓕 against qᵢ
    double pad = 0.0;   // absolute evaluation pad
    double max_residual = 0.0;
    ForceLawFn force_law;

    bool contains(double q) const;
    double value(double q) const;
    double slope(double q) const;
    double q_min() const { return curve.q_lo; }
    double q_max() const { return curve.q_hi; }
};

class ReconstructedForce {
public:
    ReconstructedForce() = default;
    ReconstructedForce(int coord, std::vector<ForceBranch> branches, State ic,
                       std::string trajectory_digest);

    int coord() const { return coord_; }
    int branch_count() const { return static_cast<int>(branches_.size()); }
    const ForceBranch& branch(int b) const { return branches_.at(b); }

    double value(double q, int branch = 0) const { return branches_.at(branch).value(q); }
    double slope(double q, int branch = 0) const { return branches_.at(branch).slope(q); }
    double time_of(double q, int branch = 0) const { return branches_.at(branch).curve.time_of(q); }

    /// Largest restriction residual |𝓕ᵢ(qᵢ(t)) − Fᵢ(t)| seen at construction.
    double max_residual() const;

    const State& ic() const { return ic_; }
    const std::string& trajectory_digest() const { return digest_; }

private:
    int coord_ = 0;
    std::vector<ForceBranch> branches_;
    State ic_;
    std::string digest_;
};

/// Restrict the nonconservative force of `sys` to the phase curve, one
/// branch per monotone segment. pad_rel scales the evaluation pad by the
/// branch coordinate range.
ReconstructedForce reconstruct_force(const Trajectory& traj, const SystemDefinition& sys,
                                     int coord, const std::vector<MonotoneSegment>& segments,
                                     double pad_rel = 0.05);

/**
 * Anchored work potential Wᵢ(qᵢ) = ∫ 𝓕ᵢ dqᵢ with Wᵢ(qᵢ₀) = 0 on the first
 * branch and value-continuous joins across branches. Quadrature is the
 * composite trapezoid on the tabulation grid with one Richardson step.
 */
class WorkPotential;

namespace detail {
/// Cumulative quadrature and anchoring shared by the direct and the
/// equivalent-stiffness routes.
WorkPotential build_work_potential(int coord, double q_i0, std::vector<ForceBranch> branches);
} // namespace detail

class WorkPotential {
public:
    static WorkPotential zero(int coord);

    int coord() const { return coord_; }
    double anchor() const { return anchor_q_; }
    int branch_count() const { return static_cast<int>(branches_.size()); }
    bool identically_zero() const { return branches_.empty(); }

    double value(double q, int branch = 0) const;
    double force(double q, int branch = 0) const;        ///< 𝓕ᵢ = dWᵢ/dqᵢ
    double force_slope(double q, int branch = 0) const;
    const ForceBranch& force_branch(int b) const { return branches_.at(b).force; }
    /// Branch whose time window contains t (nearest window otherwise).
    int branch_at_time(double t) const;

private:
    friend WorkPotential detail::build_work_potential(int, double, std::vector<ForceBranch>);

    struct Branch {
        ForceBranch force;
        Vec q_ascending, w_ascending, f_ascending;  // Hermite data, ascending q
    };

    int coord_ = 0;
    double anchor_q_ = 0.0;
    std::vector<Branch> branches_;
};

WorkPotential integrate_work_potential(const ReconstructedForce& force, double q_i0);

/**
 * The substitute conservative system Ĥ(q, p) = H(q, p) − Σᵢ Wᵢ(qᵢ) with
 *
 *     ∂Ĥ/∂qᵢ = ∂H/∂qᵢ − 𝓕ᵢ(qᵢ),   ∂Ĥ/∂pᵢ = ∂H/∂pᵢ,
 *
 * evaluated per branch (branch 0 by default).
 */
class SubstituteSystem {
public:
    SubstituteSystem() = default;
    SubstituteSystem(SystemDefinition conservative_base, std::vector<WorkPotential> potentials);

    int dim() const { return base_.dim(); }
    const SystemDefinition& base() const { return base_; }
    const WorkPotential& potential(int coord) const { return potentials_.at(coord); }

    double hamiltonian(const Vec& q, const Vec& p, const BranchSelect& branches = {}) const;
    Vec grad_q(const Vec& q, const BranchSelect& branches = {}) const;
    Vec grad_p(const Vec& p) const;
    /// ∂²Ĥ/∂q² (stiffness minus restricted-force slopes); used by the
    /// variational equations.
    Mat grad_q_jacobian(const Vec& q, const BranchSelect& branches = {}) const;

    double reconstructed_force(int coord, double q, int branch = 0) const;
    BranchSelect branches_at_time(double t) const;

private:
    SystemDefinition base_;
    std::vector<WorkPotential> potentials_;
};

/// Assemble Ĥ = H − Σ Wᵢ; damping in `sys` is stripped, one potential per
/// coordinate (WorkPotential::zero allowed).
SubstituteSystem build_substitute(const SystemDefinition& sys,
                                  std::vector<WorkPotential> potentials);

/**
 * Matrix-damping view of the restriction: per branch of coordinate i,
 * ρᵢⱼ(qᵢ) = Cᵢⱼ q̇ⱼ(t(qᵢ)), the elastic-like ratios κᵢⱼ = ρᵢⱼ/qᵢ reported
 * outside |qᵢ| <= eps_div, and the diagonal equivalent stiffness
 * K̃ᵢᵢ = Σₗ κᵢₗ. Row sums satisfy Σⱼ ρᵢⱼ = −𝓕ᵢ.
 */
class EquivalentStiffness {
public:
    int dim() const { return n_; }
    int branch_count(int coord) const { return static_cast<int>(rows_.at(coord).size()); }
    double eps_div(int coord) const { return eps_div_.at(coord); }

    double rho(int i, int j, double q, int branch = 0) const;
    double rho_row_sum(int i, double q, int branch = 0) const;
    double kappa(int i, int j, double q, int branch = 0) const;   ///< throws inside eps_div window
    double ktilde_diag(int i, double q, int branch = 0) const;

    /// Max |Σⱼ ρᵢⱼ + 𝓕ᵢ| over tabulation nodes vs. the direct reconstruction.
    double max_force_mismatch() const { return max_force_mismatch_; }

    /// Work potentials assembled from the ρ tabulations (the Eq.-(57)-style
    /// route), anchored like the direct path for comparison.
    std::vector<WorkPotential> work_potentials() const { return potentials_; }

private:
    friend EquivalentStiffness equivalent_stiffness(const Trajectory&, const SystemDefinition&,
                                                    double, double, int);

    struct RowBranch {
        BranchCurve curve;
        Mat rho_nodes;  // node x j
    };

    int n_ = 0;
    Mat damping_;
    std::vector<std::vector<RowBranch>> rows_;
    std::vector<double> eps_div_;
    std::vector<WorkPotential> potentials_;
    double max_force_mismatch_ = 0.0;
};

EquivalentStiffness equivalent_stiffness(const Trajectory& traj, const SystemDefinition& sys,
                                         double eps_div = 0.0, double eps_turn = 0.0,
                                         int nodes = 0);

} // namespace consub
