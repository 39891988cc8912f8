#include "consub/system.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace consub {

void SystemDefinition::set_mass(Mat mass) {
    if (mass.rows() != mass.cols() || mass.rows() < 1)
        throw std::invalid_argument("SystemDefinition: mass matrix must be square, n >= 1");
    if (!mass.isApprox(mass.transpose(), 1e-12))
        throw std::invalid_argument("SystemDefinition: mass matrix must be symmetric");
    Eigen::LLT<Mat> llt(mass);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("SystemDefinition: mass matrix must be positive definite");
    n_ = static_cast<int>(mass.rows());
    mass_inv_ = llt.solve(Mat::Identity(n_, n_));
    mass_ = std::move(mass);
}

SystemDefinition SystemDefinition::linear(Mat damping, Mat stiffness) {
    const Index n = stiffness.rows();
    return linear(Mat::Identity(n, n), std::move(damping), std::move(stiffness));
}

SystemDefinition SystemDefinition::linear(Mat mass, Mat damping, Mat stiffness) {
    SystemDefinition sys;
    sys.set_mass(std::move(mass));
    if (stiffness.rows() != sys.n_ || stiffness.cols() != sys.n_)
        throw std::invalid_argument("SystemDefinition: stiffness shape mismatch");
    sys.stiffness_ = std::move(stiffness);
    const bool damped = damping.size() != 0 && !damping.isZero(0.0);
    if (damped) {
        if (damping.rows() != sys.n_ || damping.cols() != sys.n_)
            throw std::invalid_argument("SystemDefinition: damping shape mismatch");
        sys.damping_ = std::move(damping);
        const Mat& C = *sys.damping_;
        sys.force_law_ = [C](const Vec&, const Vec& qdot) -> Vec { return -C * qdot; };
    }
    return sys;
}

SystemDefinition SystemDefinition::conservative(Mat stiffness) {
    const Index n = stiffness.rows();
    return linear(Mat::Zero(n, n), std::move(stiffness));
}

SystemDefinition SystemDefinition::custom(Mat mass, PotentialFn potential,
                                          PotentialGradFn potential_grad, ForceLawFn force_law) {
    if (!potential || !potential_grad)
        throw std::invalid_argument("SystemDefinition: potential and gradient are required");
    SystemDefinition sys;
    sys.set_mass(std::move(mass));
    sys.potential_ = std::move(potential);
    sys.potential_grad_ = std::move(potential_grad);
    sys.force_law_ = std::move(force_law);
    return sys;
}

const Mat& SystemDefinition::stiffness() const {
    if (!stiffness_) throw std::logic_error("SystemDefinition: no stiffness matrix");
    return *stiffness_;
}

const Mat& SystemDefinition::damping() const {
    if (!damping_) throw std::logic_error("SystemDefinition: no damping matrix");
    return *damping_;
}

double SystemDefinition::potential(const Vec& q) const {
    if (stiffness_) return 0.5 * q.dot(*stiffness_ * q);
    return potential_(q);
}

Vec SystemDefinition::potential_grad(const Vec& q) const {
    if (stiffness_) return *stiffness_ * q;
    return potential_grad_(q);
}

Vec SystemDefinition::force(const Vec& q, const Vec& qdot) const {
    if (!force_law_) return Vec::Zero(n_);
    return force_law_(q, qdot);
}

SystemDefinition SystemDefinition::without_damping() const {
    SystemDefinition sys = *this;
    sys.damping_.reset();
    sys.force_law_ = nullptr;
    return sys;
}

Vec evaluate_force(const SystemDefinition& sys, const State& state) {
    if (state.q.size() != sys.dim() || state.p.size() != sys.dim())
        throw std::invalid_argument("evaluate_force: state dimension mismatch");
    if (!state.q.allFinite() || !state.p.allFinite())
        throw std::invalid_argument("evaluate_force: non-finite state");
    return sys.force(state.q, sys.qdot_of(state.p));
}

double total_energy(const SystemDefinition& sys, const State& state) {
    if (state.q.size() != sys.dim() || state.p.size() != sys.dim())
        throw std::invalid_argument("total_energy: state dimension mismatch");
    return 0.5 * state.p.dot(sys.mass_inverse() * state.p) + sys.potential(state.q);
}

double energy_rate_check(const SystemDefinition& sys, const Trajectory& traj) {
    if (!traj.dense) throw std::invalid_argument("energy_rate_check: trajectory lacks dense output");
    const auto& dense = *traj.dense;

    // Nonconservative power F·q̇ at a dense-output time.
    auto power = [&](double t) {
        const Vec qd = dense.qdot(t);
        State s = dense.state_at(t);
        return sys.force(s.q, qd).dot(qd);
    };

    const double h0 = total_energy(sys, traj.samples.front());
    double work = 0.0;
    double max_residual = 0.0;
    double p_prev = power(traj.samples.front().t);
    for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
        const double ta = traj.samples[k].t;
        const double tb = traj.samples[k + 1].t;
        const double tm = 0.5 * (ta + tb);
        const double pm = power(tm);
        const double pb = power(tb);
        const double coarse = 0.5 * (tb - ta) * (p_prev + pb);
        const double fine = 0.5 * (tm - ta) * (p_prev + pm) + 0.5 * (tb - tm) * (pm + pb);
        // One Richardson step on the trapezoid pair.
        work += fine + (fine - coarse) / 3.0;
        p_prev = pb;

        const double h = total_energy(sys, traj.samples[k + 1]);
        max_residual = std::max(max_residual, std::abs(h - h0 - work));
    }
    return max_residual;
}

} // namespace consub
