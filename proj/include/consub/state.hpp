#pragma once

#include <memory>
#include <string>
#include <vector>

#include "consub/types.hpp"

namespace consub {

/// Canonical phase-space sample: generalized coordinates q and momenta p = M q̇.
struct State {
    double t = 0.0;
    Vec q;
    Vec p;
};

/**
 * Piecewise cubic Hermite dense output over the accepted integration steps.
 *
 * Each node stores the state z = (q, p), its time derivative, and q̈, so q,
 * q̇ and p all get their own O(h⁴) Hermite interpolant between nodes.
 */
class DenseOutput {
public:
    DenseOutput(int dof, std::vector<double> t, std::vector<Vec> z,
                std::vector<Vec> dz, std::vector<Vec> qdd);

    int dof() const { return n_; }
    double t_front() const { return t_.front(); }
    double t_back() const { return t_.back(); }
    std::size_t node_count() const { return t_.size(); }
    const std::vector<double>& node_times() const { return t_; }
    const Vec& node_derivative(std::size_t k) const { return dz_[k]; }

    Vec state(double t) const;          ///< (q; p), size 2n
    State state_at(double t) const;
    double q(double t, int coord) const;
    double qdot(double t, int coord) const;
    Vec qdot(double t) const;

private:
    std::size_t locate(double t) const;
    double clamp_time(double t) const;

    int n_ = 0;
    std::vector<double> t_;
    std::vector<Vec> z_, dz_, qdd_;
};

struct TrajectoryMeta {
    std::string method;
    double abs_tol = 0.0;
    double rel_tol = 0.0;
    double step = 0.0;
    long accepted = 0;
    long rejected = 0;
    long rhs_evals = 0;
    double h_min = 0.0;
    double h_max = 0.0;
    std::string note;  // e.g. domain-exit events during substitute integration
};

/// Ordered samples of one phase curve plus the dense output they came from.
struct Trajectory {
    std::vector<State> samples;
    State ic;
    TrajectoryMeta meta;
    std::shared_ptr<const DenseOutput> dense;

    int dof() const { return static_cast<int>(ic.q.size()); }
    double t_begin() const { return samples.front().t; }
    double t_end() const { return samples.back().t; }
};

/// Provenance digest over the sample sequence (t, q, p bit patterns).
std::string trajectory_hash(const Trajectory& traj);

} // namespace consub
