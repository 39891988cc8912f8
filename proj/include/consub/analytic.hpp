#pragma once

#include <functional>
#include <vector>

#include "consub/system.hpp"
#include "consub/types.hpp"

namespace consub::analytic {

/// Exact solution of a test system, evaluable for position, velocity and
/// acceleration at any time.
struct ClosedFormSolution {
    int n = 0;
    std::function<Vec(double)> q;
    std::function<Vec(double)> qdot;
    std::function<Vec(double)> qddot;

    State state(double t) const {
        return State{t, q(t), qdot(t)};  // unit mass in every family: p = q̇
    }
};

/**
 * Free particle with viscous drag, q̈ + c q̇ = 0.
 *
 * x(t) = A₁ + A₂ e^{−ct} with A₁ = x₀ + ẋ₀/c, A₂ = −ẋ₀/c. The curve is
 * monotone, so the restricted force has a single branch.
 */
struct Drag1d {
    double c = 1.0;
    double x0 = 0.0, v0 = 1.0;
    double A1 = 0.0, A2 = 0.0;
    ClosedFormSolution solution;
    SystemDefinition system;

    double time_of(double x) const;           ///< inverse map t(x)
    double restricted_force(double x) const;  ///< 𝓕(x) = c²(x − A₁)
    double work_potential(double x) const;    ///< W(x), anchored W(x₀) = 0
    double substitute_energy() const;         ///< constant Ĥ along the curve
};

Drag1d analytic_1d_drag(double c, double x0, double v0);

/**
 * The coupled pair ẍ = −ẋ + ẏ, ÿ = ẋ − ẏ restricted to ẋ₀ + ẏ₀ = 0,
 * which removes the secular terms so both coordinates stay monotone.
 */
struct Coupled2d {
    Vec ic_q, ic_v;
    double dv = 0.0;  // ẏ₀ − ẋ₀
    ClosedFormSolution solution;
    SystemDefinition system;

    double time_of_x(double x) const;
    double time_of_y(double y) const;
    double restricted_force_x(double x) const;  ///< 𝓕₁(x) = 4x + dv − 4x₀
    double restricted_force_y(double y) const;  ///< 𝓕₂(y) = 4y − dv − 4y₀
    double work_potential_x(double x) const;
    double work_potential_y(double y) const;
    double substitute_energy() const;
};

Coupled2d analytic_2d(double x0, double y0, double vx0, double vy0);

/// Unconstrained variant of the coupled pair (secular terms included); used
/// only to validate integrators against the full general solution.
ClosedFormSolution analytic_2d_general(double x0, double y0, double vx0, double vy0);

/**
 * Underdamped oscillator q̈ + 2η q̇ + ω² q = 0 with 0 < η < ω; the
 * multi-branch stress case. Turning times of q̇ are exposed for
 * segmentation tests.
 */
struct DampedOscillator {
    double eta = 0.1, omega = 1.0, omega1 = 0.0;
    double x0 = 1.0, v0 = 0.0;
    ClosedFormSolution solution;
    SystemDefinition system;

    std::vector<double> turning_times(double t_max) const;  ///< zeros of q̇ in (0, t_max]
};

DampedOscillator analytic_damped_oscillator(double eta, double omega, double x0, double v0);

/// n-dimensional linear oscillator q̈ + C q̇ + K q = 0 with unit mass;
/// the entry point for the matrix-damping pipeline.
SystemDefinition build_ndim_damped(const Mat& damping, const Mat& stiffness);

/// Max |M q̈ + C q̇ + K q| residual of a closed form against a linear
/// system at `count` deterministic pseudo-random times in [0, t_max].
double ode_residual(const ClosedFormSolution& sol, const SystemDefinition& sys,
                    double t_max, int count, unsigned seed = 12345);

} // namespace consub::analytic
