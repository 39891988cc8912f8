#include "consub/analytic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace consub::analytic {

Drag1d analytic_1d_drag(double c, double x0, double v0) {
    if (!(c > 0.0)) throw std::invalid_argument("analytic_1d_drag: require c > 0");
    Drag1d d;
    d.c = c;
    d.x0 = x0;
    d.v0 = v0;
    d.A1 = x0 + v0 / c;
    d.A2 = -v0 / c;

    const double A1 = d.A1, A2 = d.A2;
    d.solution.n = 1;
    d.solution.q = [A1, A2, c](double t) { return Vec::Constant(1, A1 + A2 * std::exp(-c * t)); };
    d.solution.qdot = [A2, c](double t) { return Vec::Constant(1, -c * A2 * std::exp(-c * t)); };
    d.solution.qddot = [A2, c](double t) {
        return Vec::Constant(1, c * c * A2 * std::exp(-c * t));
    };
    d.system = SystemDefinition::linear(Mat::Constant(1, 1, c), Mat::Zero(1, 1));
    return d;
}

double Drag1d::time_of(double x) const {
    return -std::log((x - A1) / A2) / c;
}

double Drag1d::restricted_force(double x) const {
    // F = −c q̇ and q̇ = −c (x − A₁) on the curve.
    return c * c * (x - A1);
}

double Drag1d::work_potential(double x) const {
    return c * c * (0.5 * (x * x - x0 * x0) - A1 * (x - x0));
}

double Drag1d::substitute_energy() const {
    return 0.5 * v0 * v0;  // H(0) with W anchored at x₀
}

Coupled2d analytic_2d(double x0, double y0, double vx0, double vy0) {
    if (std::abs(vx0 + vy0) > 1e-14)
        throw std::invalid_argument("analytic_2d: requires x'0 + y'0 = 0");
    Coupled2d s;
    s.ic_q = Vec(2);
    s.ic_q << x0, y0;
    s.ic_v = Vec(2);
    s.ic_v << vx0, vy0;
    s.dv = vy0 - vx0;
    const double dv = s.dv;

    s.solution.n = 2;
    s.solution.q = [x0, y0, dv](double t) {
        const double e = std::exp(-2.0 * t);
        Vec q(2);
        q << -(dv - 4.0 * x0) / 4.0 + e * dv / 4.0, (dv + 4.0 * y0) / 4.0 - e * dv / 4.0;
        return q;
    };
    s.solution.qdot = [dv](double t) {
        const double e = std::exp(-2.0 * t);
        Vec v(2);
        v << -e * dv / 2.0, e * dv / 2.0;
        return v;
    };
    s.solution.qddot = [dv](double t) {
        const double e = std::exp(-2.0 * t);
        Vec a(2);
        a << e * dv, -e * dv;
        return a;
    };

    Mat C(2, 2);
    C << 1.0, -1.0, -1.0, 1.0;
    s.system = SystemDefinition::linear(C, Mat::Zero(2, 2));
    return s;
}

double Coupled2d::time_of_x(double x) const {
    return -0.5 * std::log(4.0 * (x - ic_q[0]) / dv + 1.0);
}

double Coupled2d::time_of_y(double y) const {
    return -0.5 * std::log(-4.0 * (y - ic_q[1]) / dv + 1.0);
}

double Coupled2d::restricted_force_x(double x) const {
    return 4.0 * x + dv - 4.0 * ic_q[0];
}

double Coupled2d::restricted_force_y(double y) const {
    return 4.0 * y - dv - 4.0 * ic_q[1];
}

double Coupled2d::work_potential_x(double x) const {
    const double x0 = ic_q[0];
    return 2.0 * (x * x - x0 * x0) + (dv - 4.0 * x0) * (x - x0);
}

double Coupled2d::work_potential_y(double y) const {
    const double y0 = ic_q[1];
    return 2.0 * (y * y - y0 * y0) - (dv + 4.0 * y0) * (y - y0);
}

double Coupled2d::substitute_energy() const {
    return 0.5 * ic_v.squaredNorm();
}

ClosedFormSolution analytic_2d_general(double x0, double y0, double vx0, double vy0) {
    const double dv = vy0 - vx0;
    const double sv = vy0 + vx0;
    ClosedFormSolution sol;
    sol.n = 2;
    sol.q = [x0, y0, dv, sv](double t) {
        const double e = std::exp(-2.0 * t);
        Vec q(2);
        q << -(dv - 4.0 * x0) / 4.0 + e * dv / 4.0 + 0.5 * t * sv,
            (dv + 4.0 * y0) / 4.0 - e * dv / 4.0 + 0.5 * t * sv;
        return q;
    };
    sol.qdot = [dv, sv](double t) {
        const double e = std::exp(-2.0 * t);
        Vec v(2);
        v << -e * dv / 2.0 + 0.5 * sv, e * dv / 2.0 + 0.5 * sv;
        return v;
    };
    sol.qddot = [dv](double t) {
        const double e = std::exp(-2.0 * t);
        Vec a(2);
        a << e * dv, -e * dv;
        return a;
    };
    return sol;
}

DampedOscillator analytic_damped_oscillator(double eta, double omega, double x0, double v0) {
    if (!(eta > 0.0 && eta < omega))
        throw std::invalid_argument("analytic_damped_oscillator: requires 0 < eta < omega");
    DampedOscillator d;
    d.eta = eta;
    d.omega = omega;
    d.omega1 = std::sqrt(omega * omega - eta * eta);
    d.x0 = x0;
    d.v0 = v0;

    const double w1 = d.omega1;
    const double A = x0;
    const double B = (v0 + eta * x0) / w1;
    d.solution.n = 1;
    d.solution.q = [A, B, eta, w1](double t) {
        return Vec::Constant(1, std::exp(-eta * t) * (A * std::cos(w1 * t) + B * std::sin(w1 * t)));
    };
    const double Cv = v0;
    const double Dv = -(omega * omega * x0 + eta * v0) / w1;
    d.solution.qdot = [Cv, Dv, eta, w1](double t) {
        return Vec::Constant(1,
                             std::exp(-eta * t) * (Cv * std::cos(w1 * t) + Dv * std::sin(w1 * t)));
    };
    const double Ca = -eta * Cv + Dv * w1;
    const double Da = -eta * Dv - Cv * w1;
    d.solution.qddot = [Ca, Da, eta, w1](double t) {
        return Vec::Constant(1,
                             std::exp(-eta * t) * (Ca * std::cos(w1 * t) + Da * std::sin(w1 * t)));
    };

    d.system = SystemDefinition::linear(Mat::Constant(1, 1, 2.0 * eta),
                                        Mat::Constant(1, 1, omega * omega));
    return d;
}

std::vector<double> DampedOscillator::turning_times(double t_max) const {
    // q̇ ∝ C cos(ω₁ t) + D sin(ω₁ t): zeros at atan2 offsets spaced π/ω₁.
    const double C = v0;
    const double D = -(omega * omega * x0 + eta * v0) / omega1;
    std::vector<double> zeros;
    double phase = std::atan2(-C, D);  // solves C cos + D sin = 0
    double t0 = phase / omega1;
    const double spacing = M_PI / omega1;
    while (t0 <= 0.0) t0 += spacing;
    for (double t = t0; t <= t_max; t += spacing) zeros.push_back(t);
    return zeros;
}

SystemDefinition build_ndim_damped(const Mat& damping, const Mat& stiffness) {
    if (damping.rows() != damping.cols() || stiffness.rows() != stiffness.cols() ||
        damping.rows() != stiffness.rows())
        throw std::invalid_argument("build_ndim_damped: C and K must be square with equal n");
    if (!stiffness.isApprox(stiffness.transpose(), 1e-12))
        throw std::invalid_argument("build_ndim_damped: K must be symmetric");
    return SystemDefinition::linear(damping, stiffness);
}

double ode_residual(const ClosedFormSolution& sol, const SystemDefinition& sys, double t_max,
                    int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, t_max);
    double worst = 0.0;
    for (int k = 0; k < count; ++k) {
        const double t = uni(rng);
        const Vec q = sol.q(t);
        const Vec v = sol.qdot(t);
        const Vec a = sol.qddot(t);
        const Vec residual = sys.mass() * a + sys.potential_grad(q) - sys.force(q, v);
        worst = std::max(worst, residual.lpNorm<Eigen::Infinity>());
    }
    return worst;
}

} // namespace consub::analytic
