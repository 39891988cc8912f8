#pragma once

#include <functional>
#include <optional>

#include "consub/state.hpp"
#include "consub/types.hpp"

namespace consub {

using PotentialFn = std::function<double(const Vec&)>;
using PotentialGradFn = std::function<Vec(const Vec&)>;
using ForceLawFn = std::function<Vec(const Vec&, const Vec&)>;

/**
 * A mechanical system in canonical form
 *
 *     q̇ᵢ = ∂H/∂pᵢ,   ṗᵢ = −∂H/∂qᵢ + Fᵢ(q, q̇),
 *
 * with H = ½ pᵀ M⁻¹ p + V(q). The generalized force F carries the
 * nonconservative part; this sign convention is used everywhere in the
 * library, so matrix damping enters as F = −C q̇.
 */
class SystemDefinition {
public:
    SystemDefinition() = default;  // empty; assign from a factory before use

    /// Linear family q̈ + M⁻¹(C q̇ + K q) = 0 with identity mass.
    static SystemDefinition linear(Mat damping, Mat stiffness);
    static SystemDefinition linear(Mat mass, Mat damping, Mat stiffness);
    /// Undamped linear system (identity mass).
    static SystemDefinition conservative(Mat stiffness);
    /// General conservative part plus an arbitrary force law (nullptr = none).
    static SystemDefinition custom(Mat mass, PotentialFn potential,
                                   PotentialGradFn potential_grad, ForceLawFn force_law);

    int dim() const { return n_; }
    const Mat& mass() const { return mass_; }
    const Mat& mass_inverse() const { return mass_inv_; }

    bool linear_family() const { return stiffness_.has_value(); }
    const Mat& stiffness() const;
    bool has_damping_matrix() const { return damping_.has_value(); }
    const Mat& damping() const;
    /// True when the system carries no nonconservative force at all.
    bool is_conservative() const { return !force_law_; }

    double potential(const Vec& q) const;
    Vec potential_grad(const Vec& q) const;
    /// Nonconservative generalized force F(q, q̇); zero vector when absent.
    Vec force(const Vec& q, const Vec& qdot) const;
    Vec qdot_of(const Vec& p) const { return mass_inv_ * p; }
    Vec momentum_of(const Vec& qdot) const { return mass_ * qdot; }

    /// The conservative part alone (damping stripped); basis of substitutes.
    SystemDefinition without_damping() const;

private:
    void set_mass(Mat mass);

    int n_ = 0;
    Mat mass_, mass_inv_;
    std::optional<Mat> stiffness_;
    std::optional<Mat> damping_;
    PotentialFn potential_;
    PotentialGradFn potential_grad_;
    ForceLawFn force_law_;
};

/// F(q, q̇) at a state, with dimension and finiteness validation.
Vec evaluate_force(const SystemDefinition& sys, const State& state);

/// Total mechanical energy H = ½ pᵀ M⁻¹ p + V(q).
double total_energy(const SystemDefinition& sys, const State& state);

/**
 * Work-energy consistency guard: max over samples of
 * |H(t) − H(0) − ∫ F·q̇ dt| with the work integral accumulated by
 * Richardson-refined trapezoidal quadrature on the dense output.
 */
double energy_rate_check(const SystemDefinition& sys, const Trajectory& traj);

} // namespace consub
