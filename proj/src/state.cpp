#include "consub/state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "consub/hashing.hpp"
#include "consub/interpolation.hpp"

namespace consub {

DenseOutput::DenseOutput(int dof, std::vector<double> t, std::vector<Vec> z,
                         std::vector<Vec> dz, std::vector<Vec> qdd)
    : n_(dof), t_(std::move(t)), z_(std::move(z)), dz_(std::move(dz)), qdd_(std::move(qdd)) {
    if (t_.size() < 2 || t_.size() != z_.size() || t_.size() != dz_.size() ||
        t_.size() != qdd_.size())
        throw std::invalid_argument("DenseOutput: inconsistent node arrays");
    for (std::size_t k = 0; k + 1 < t_.size(); ++k)
        if (!(t_[k + 1] > t_[k]))
            throw std::invalid_argument("DenseOutput: node times not increasing");
}

double DenseOutput::clamp_time(double t) const {
    const double lo = t_.front();
    const double hi = t_.back();
    const double slack = 1e-9 * (1.0 + std::abs(hi - lo));
    if (t < lo - slack || t > hi + slack)
        throw std::domain_error("DenseOutput: query time outside the integrated window");
    return std::clamp(t, lo, hi);
}

std::size_t DenseOutput::locate(double t) const {
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - t_.begin());
    if (k == 0) return 0;
    if (k >= t_.size()) return t_.size() - 2;
    return k - 1;
}

Vec DenseOutput::state(double t) const {
    t = clamp_time(t);
    const std::size_t k = locate(t);
    Vec out(2 * n_);
    for (int i = 0; i < 2 * n_; ++i)
        out[i] = hermite_value(t_[k], t_[k + 1], z_[k][i], z_[k + 1][i],
                               dz_[k][i], dz_[k + 1][i], t);
    return out;
}

State DenseOutput::state_at(double t) const {
    Vec z = state(t);
    State s;
    s.t = clamp_time(t);
    s.q = z.head(n_);
    s.p = z.tail(n_);
    return s;
}

double DenseOutput::q(double t, int coord) const {
    t = clamp_time(t);
    const std::size_t k = locate(t);
    return hermite_value(t_[k], t_[k + 1], z_[k][coord], z_[k + 1][coord],
                         dz_[k][coord], dz_[k + 1][coord], t);
}

double DenseOutput::qdot(double t, int coord) const {
    t = clamp_time(t);
    const std::size_t k = locate(t);
    // q̇ nodes carry q̈ as their derivative data.
    return hermite_value(t_[k], t_[k + 1], dz_[k][coord], dz_[k + 1][coord],
                         qdd_[k][coord], qdd_[k + 1][coord], t);
}

Vec DenseOutput::qdot(double t) const {
    Vec out(n_);
    for (int i = 0; i < n_; ++i) out[i] = qdot(t, i);
    return out;
}

std::string trajectory_hash(const Trajectory& traj) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const State& s : traj.samples) {
        h = fnv1a(s.t, h);
        h = fnv1a(s.q, h);
        h = fnv1a(s.p, h);
    }
    return hex_digest(h);
}

} // namespace consub
