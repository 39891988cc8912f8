#include "consub/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace consub {

namespace {

double sign_of(double x) { return (x > 0.0) - (x < 0.0); }

std::string domain_exit_message(int coord, int branch, double query, double lo, double hi) {
    std::ostringstream os;
    os << "domain exit: q[" << coord << "] = " << query << " outside branch " << branch
       << " domain [" << lo << ", " << hi << "]";
    return os.str();
}

} // namespace

DomainExit::DomainExit(int coord_in, int branch_in, double query_in, double lo_in, double hi_in)
    : std::domain_error(domain_exit_message(coord_in, branch_in, query_in, lo_in, hi_in)),
      coord(coord_in), branch(branch_in), query(query_in), lo(lo_in), hi(hi_in) {}

double MonotoneSegment::q_min() const { return q_samples.minCoeff(); }
double MonotoneSegment::q_max() const { return q_samples.maxCoeff(); }

// ---------------------------------------------------------------------------
// segment_monotone
// ---------------------------------------------------------------------------

namespace {

constexpr int kDefaultBranchNodes = 1025;

// Bisect a sign change of f on [ta, tb] down to machine width.
template <typename F>
double bisect_root(F&& f, double ta, double tb, double fa) {
    for (int it = 0; it < 200; ++it) {
        const double tm = 0.5 * (ta + tb);
        if (tm == ta || tm == tb) break;
        const double fm = f(tm);
        if (fm == 0.0) return tm;
        if (sign_of(fm) == sign_of(fa)) {
            ta = tm;
            fa = fm;
        } else {
            tb = tm;
        }
    }
    return 0.5 * (ta + tb);
}

// First t in [ta, tb] with |f(t)| >= eps, given |f(ta)| < eps <= |f(tb)|.
template <typename F>
double bisect_threshold(F&& f, double ta, double tb, double eps) {
    for (int it = 0; it < 200; ++it) {
        const double tm = 0.5 * (ta + tb);
        if (tm == ta || tm == tb) break;
        if (std::abs(f(tm)) >= eps)
            tb = tm;
        else
            ta = tm;
    }
    return tb;
}

} // namespace

std::vector<MonotoneSegment> segment_monotone(const Trajectory& traj, int coord, double eps_turn,
                                              int nodes) {
    if (!traj.dense) throw std::invalid_argument("segment_monotone: trajectory lacks dense output");
    if (traj.samples.size() < 2) throw std::invalid_argument("segment_monotone: need >= 2 samples");
    if (coord < 0 || coord >= traj.dof())
        throw std::invalid_argument("segment_monotone: coordinate out of range");

    const auto dense = traj.dense;
    auto qdot = [&](double t) { return dense->qdot(t, coord); };

    // Scan on dense nodes plus midpoints; node derivatives are exact.
    const auto& node_t = dense->node_times();
    std::vector<double> scan;
    scan.reserve(2 * node_t.size());
    for (std::size_t k = 0; k + 1 < node_t.size(); ++k) {
        scan.push_back(node_t[k]);
        scan.push_back(0.5 * (node_t[k] + node_t[k + 1]));
    }
    scan.push_back(node_t.back());

    double vmax = 0.0;
    for (double t : scan) vmax = std::max(vmax, std::abs(qdot(t)));
    if (vmax == 0.0)
        throw DegenerateCoordinateError("segment_monotone: coordinate is identically constant");

    const double eps = eps_turn > 0.0 ? eps_turn : 1e-8 * vmax;
    if (eps >= vmax)
        throw ThresholdError("segment_monotone: eps_turn leaves no monotone window");

    // Turning points: sign changes of q̇ᵢ refined by bisection.
    std::vector<double> turns;
    double f_prev = qdot(scan.front());
    for (std::size_t k = 0; k + 1 < scan.size(); ++k) {
        const double f_next = qdot(scan[k + 1]);
        if (f_prev == 0.0) {
            turns.push_back(scan[k]);
        } else if (sign_of(f_prev) * sign_of(f_next) < 0.0) {
            turns.push_back(bisect_root(qdot, scan[k], scan[k + 1], f_prev));
        }
        f_prev = f_next;
    }
    if (f_prev == 0.0) turns.push_back(scan.back());
    turns.erase(std::unique(turns.begin(), turns.end()), turns.end());

    std::vector<double> bounds;
    bounds.push_back(dense->t_front());
    for (double t : turns)
        if (t > dense->t_front() && t < dense->t_back()) bounds.push_back(t);
    bounds.push_back(dense->t_back());

    const int node_count = nodes > 0 ? std::max(nodes, 8) : kDefaultBranchNodes;
    std::vector<MonotoneSegment> segments;

    for (std::size_t w = 0; w + 1 < bounds.size(); ++w) {
        const double ta = bounds[w];
        const double tb = bounds[w + 1];
        const double tm = 0.5 * (ta + tb);
        if (std::abs(qdot(tm)) < eps) continue;  // window never clears the threshold

        double t_start = ta;
        if (std::abs(qdot(ta)) < eps) t_start = bisect_threshold(qdot, ta, tm, eps);
        double t_stop = tb;
        if (std::abs(qdot(tb)) < eps) {
            // mirror of bisect_threshold toward the right edge
            double lo = tm, hi = tb;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid == lo || mid == hi) break;
                if (std::abs(qdot(mid)) >= eps)
                    lo = mid;
                else
                    hi = mid;
            }
            t_stop = lo;
        }
        if (!(t_stop > t_start)) continue;

        Vec ts(node_count), qs(node_count), vs(node_count);
        for (int k = 0; k < node_count; ++k) {
            const double t =
                t_start + (t_stop - t_start) * static_cast<double>(k) / (node_count - 1);
            ts[k] = t;
            qs[k] = dense->q(t, coord);
            vs[k] = dense->qdot(t, coord);
        }

        // Keep the longest strictly monotone run; interpolation wiggle right
        // at the threshold edges can otherwise break strictness.
        const double dir = sign_of(qs[node_count - 1] - qs[0]);
        if (dir == 0.0) continue;
        int best_lo = 0, best_hi = 0, run_lo = 0;
        for (int k = 0; k + 1 < node_count; ++k) {
            const bool ok = sign_of(qs[k + 1] - qs[k]) == dir;
            if (!ok) {
                if (k - run_lo > best_hi - best_lo) {
                    best_lo = run_lo;
                    best_hi = k;
                }
                run_lo = k + 1;
            }
        }
        if (node_count - 1 - run_lo > best_hi - best_lo) {
            best_lo = run_lo;
            best_hi = node_count - 1;
        }
        const int len = best_hi - best_lo + 1;
        if (len < 8) continue;

        MonotoneSegment seg;
        seg.coord = coord;
        seg.branch_id = static_cast<int>(segments.size());
        seg.increasing = dir > 0.0;
        seg.t_samples = ts.segment(best_lo, len);
        seg.q_samples = qs.segment(best_lo, len);
        seg.qdot_samples = vs.segment(best_lo, len);
        seg.t_a = seg.t_samples[0];
        seg.t_b = seg.t_samples[len - 1];
        seg.dense = dense;
        segments.push_back(std::move(seg));
    }

    if (segments.empty())
        throw ThresholdError("segment_monotone: threshold produced an empty cover");
    return segments;
}

// ---------------------------------------------------------------------------
// BranchCurve / InverseMap
// ---------------------------------------------------------------------------

double BranchCurve::time_of(double q_query) const {
    const double q = std::clamp(q_query, q_lo, q_hi);
    double lo = t_lo, hi = t_hi;
    double t = std::clamp(seed(q), lo, hi);
    const double tol_q = 1e-15 * std::max(1.0, std::max(std::abs(q_lo), std::abs(q_hi)));

    for (int it = 0; it < 100; ++it) {
        const double f = dense->q(t, coord) - q;
        if (std::abs(f) <= tol_q) return t;
        const bool above = increasing ? (f > 0.0) : (f < 0.0);
        (above ? hi : lo) = t;
        const double d = dense->qdot(t, coord);
        double t_next = d != 0.0 ? t - f / d : 0.5 * (lo + hi);
        if (!(t_next > lo && t_next < hi)) t_next = 0.5 * (lo + hi);
        if (std::abs(t_next - t) <= 4e-16 * std::max(1.0, std::abs(t))) return t_next;
        t = t_next;
    }
    return t;
}

BranchCurve make_branch_curve(const MonotoneSegment& segment) {
    if (segment.t_samples.size() < 4)
        throw std::invalid_argument("make_branch_curve: fewer than 4 samples in segment");
    BranchCurve curve;
    curve.coord = segment.coord;
    curve.branch_id = segment.branch_id;
    curve.increasing = segment.increasing;
    curve.t_lo = segment.t_a;
    curve.t_hi = segment.t_b;
    curve.t_nodes = segment.t_samples;
    curve.q_nodes = segment.q_samples;
    curve.qdot_nodes = segment.qdot_samples;
    curve.q_lo = segment.q_min();
    curve.q_hi = segment.q_max();
    curve.seed = Pchip(segment.q_samples, segment.t_samples);
    curve.dense = segment.dense;
    return curve;
}

double InverseMap::round_trip_error() const {
    double worst = 0.0;
    for (Index k = 0; k < curve.q_nodes.size(); ++k) {
        const double q = curve.q_nodes[k];
        worst = std::max(worst, std::abs(curve.dense->q(curve.time_of(q), curve.coord) - q));
    }
    return worst;
}

InverseMap build_inverse_map(const MonotoneSegment& segment) {
    if (segment.t_samples.size() < 4)
        throw std::invalid_argument("build_inverse_map: fewer than 4 samples in segment");
    return InverseMap{segment, make_branch_curve(segment)};
}

// ---------------------------------------------------------------------------
// ReconstructedForce
// ---------------------------------------------------------------------------

bool ForceBranch::contains(double q) const {
    return q >= curve.q_lo - pad && q <= curve.q_hi + pad;
}

double ForceBranch::value(double q) const {
    if (!contains(q))
        throw DomainExit(curve.coord, curve.branch_id, q, curve.q_lo, curve.q_hi);
    if (q < curve.q_lo)
        return force_seed(curve.q_lo) + force_seed.derivative(curve.q_lo) * (q - curve.q_lo);
    if (q > curve.q_hi)
        return force_seed(curve.q_hi) + force_seed.derivative(curve.q_hi) * (q - curve.q_hi);
    const double t = curve.time_of(q);
    const State s = curve.dense->state_at(t);
    return force_law(s.q, curve.dense->qdot(t))[curve.coord];
}

double ForceBranch::slope(double q) const {
    if (!contains(q))
        throw DomainExit(curve.coord, curve.branch_id, q, curve.q_lo, curve.q_hi);
    if (q <= curve.q_lo) return force_seed.derivative(curve.q_lo);
    if (q >= curve.q_hi) return force_seed.derivative(curve.q_hi);

    const double t = curve.time_of(q);
    const double qd = curve.dense->qdot(t, curve.coord);
    const double vscale = curve.qdot_nodes.cwiseAbs().maxCoeff();
    if (std::abs(qd) < 1e-6 * vscale) return force_seed.derivative(q);

    auto force_at = [&](double tt) {
        const State s = curve.dense->state_at(tt);
        return force_law(s.q, curve.dense->qdot(tt))[curve.coord];
    };
    const double delta = 1e-6 * (curve.t_hi - curve.t_lo);
    const double t_plus = std::min(t + delta, curve.t_hi);
    const double t_minus = std::max(t - delta, curve.t_lo);
    return (force_at(t_plus) - force_at(t_minus)) / (t_plus - t_minus) / qd;
}

ReconstructedForce::ReconstructedForce(int coord, std::vector<ForceBranch> branches, State ic,
                                       std::string trajectory_digest)
    : coord_(coord), branches_(std::move(branches)), ic_(std::move(ic)),
      digest_(std::move(trajectory_digest)) {}

double ReconstructedForce::max_residual() const {
    double worst = 0.0;
    for (const auto& b : branches_) worst = std::max(worst, b.max_residual);
    return worst;
}

ReconstructedForce reconstruct_force(const Trajectory& traj, const SystemDefinition& sys,
                                     int coord, const std::vector<MonotoneSegment>& segments,
                                     double pad_rel) {
    if (segments.empty()) throw std::invalid_argument("reconstruct_force: no segments");
    auto sys_shared = std::make_shared<const SystemDefinition>(sys);
    ForceLawFn law = [sys_shared](const Vec& q, const Vec& qd) { return sys_shared->force(q, qd); };

    std::vector<ForceBranch> branches;
    branches.reserve(segments.size());
    for (const auto& seg : segments) {
        if (seg.coord != coord)
            throw std::invalid_argument("reconstruct_force: segment coordinate mismatch");
        ForceBranch fb;
        fb.curve = make_branch_curve(seg);
        const Index m = fb.curve.t_nodes.size();
        fb.force_nodes = Vec(m);
        for (Index k = 0; k < m; ++k) {
            const double t = fb.curve.t_nodes[k];
            const State s = seg.dense->state_at(t);
            fb.force_nodes[k] = sys.force(s.q, seg.dense->qdot(t))[coord];
        }
        fb.force_seed = Pchip(fb.curve.q_nodes, fb.force_nodes);
        fb.pad = pad_rel * (fb.curve.q_hi - fb.curve.q_lo);
        fb.force_law = law;

        // Restriction identity audit on the trajectory samples in-window.
        double worst = 0.0;
        for (const State& s : traj.samples) {
            if (s.t < fb.curve.t_lo || s.t > fb.curve.t_hi) continue;
            const double q = s.q[coord];
            if (q < fb.curve.q_lo || q > fb.curve.q_hi) continue;
            const double expected = sys.force(s.q, sys.qdot_of(s.p))[coord];
            worst = std::max(worst, std::abs(fb.value(q) - expected));
        }
        fb.max_residual = worst;
        branches.push_back(std::move(fb));
    }
    return ReconstructedForce(coord, std::move(branches), traj.ic, trajectory_hash(traj));
}

// ---------------------------------------------------------------------------
// WorkPotential
// ---------------------------------------------------------------------------

namespace {

// Cumulative ∫ F dq along one branch: trapezoid on the tabulation grid plus
// one Richardson step using force values at the time midpoints.
Vec cumulative_work(const ForceBranch& fb) {
    const auto& curve = fb.curve;
    auto force_at = [&](double t) {
        const State s = curve.dense->state_at(t);
        return fb.force_law(s.q, curve.dense->qdot(t))[curve.coord];
    };
    const Index m = curve.t_nodes.size();
    Vec w(m);
    w[0] = 0.0;
    for (Index k = 0; k + 1 < m; ++k) {
        const double t_mid = 0.5 * (curve.t_nodes[k] + curve.t_nodes[k + 1]);
        const double q_mid = curve.dense->q(t_mid, curve.coord);
        const double f_mid = force_at(t_mid);
        const double qa = curve.q_nodes[k], qb = curve.q_nodes[k + 1];
        const double fa = fb.force_nodes[k], fbv = fb.force_nodes[k + 1];
        const double coarse = 0.5 * (fa + fbv) * (qb - qa);
        const double fine = 0.5 * (fa + f_mid) * (q_mid - qa) + 0.5 * (f_mid + fbv) * (qb - q_mid);
        w[k + 1] = w[k] + fine + (fine - coarse) / 3.0;
    }
    return w;
}

} // namespace

WorkPotential WorkPotential::zero(int coord) {
    WorkPotential w;
    w.coord_ = coord;
    return w;
}

double WorkPotential::value(double q, int branch) const {
    if (branches_.empty()) return 0.0;
    const Branch& b = branches_.at(branch);
    const auto& curve = b.force.curve;
    if (!b.force.contains(q))
        throw DomainExit(curve.coord, curve.branch_id, q, curve.q_lo, curve.q_hi);

    const Index m = b.q_ascending.size();
    if (q < b.q_ascending[0]) {
        const double d = q - b.q_ascending[0];
        const double slope = b.force.force_seed.derivative(b.q_ascending[0]);
        return b.w_ascending[0] + b.f_ascending[0] * d + 0.5 * slope * d * d;
    }
    if (q > b.q_ascending[m - 1]) {
        const double d = q - b.q_ascending[m - 1];
        const double slope = b.force.force_seed.derivative(b.q_ascending[m - 1]);
        return b.w_ascending[m - 1] + b.f_ascending[m - 1] * d + 0.5 * slope * d * d;
    }
    const double* begin = b.q_ascending.data();
    Index k = static_cast<Index>(std::upper_bound(begin, begin + m, q) - begin) - 1;
    k = std::clamp<Index>(k, 0, m - 2);
    return hermite_value(b.q_ascending[k], b.q_ascending[k + 1], b.w_ascending[k],
                         b.w_ascending[k + 1], b.f_ascending[k], b.f_ascending[k + 1], q);
}

double WorkPotential::force(double q, int branch) const {
    if (branches_.empty()) return 0.0;
    return branches_.at(branch).force.value(q);
}

double WorkPotential::force_slope(double q, int branch) const {
    if (branches_.empty()) return 0.0;
    return branches_.at(branch).force.slope(q);
}

int WorkPotential::branch_at_time(double t) const {
    if (branches_.empty()) return 0;
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        const auto& curve = branches_[b].force.curve;
        if (t >= curve.t_lo && t <= curve.t_hi) return static_cast<int>(b);
        const double d = t < curve.t_lo ? curve.t_lo - t : t - curve.t_hi;
        if (d < best) {
            best = d;
            nearest = static_cast<int>(b);
        }
    }
    return nearest;
}

WorkPotential integrate_work_potential(const ReconstructedForce& force, double q_i0) {
    std::vector<ForceBranch> branches;
    branches.reserve(force.branch_count());
    for (int b = 0; b < force.branch_count(); ++b) branches.push_back(force.branch(b));
    return detail::build_work_potential(force.coord(), q_i0, std::move(branches));
}

namespace detail {

WorkPotential build_work_potential(int coord, double q_i0, std::vector<ForceBranch> branches) {
    if (branches.empty())
        throw std::invalid_argument("integrate_work_potential: no branches");
    {
        const auto& first = branches.front();
        if (!first.contains(q_i0))
            throw std::domain_error("integrate_work_potential: anchor outside first branch domain");
    }

    WorkPotential pot;
    pot.coord_ = coord;
    pot.anchor_q_ = q_i0;
    double offset = 0.0;
    double prev_q_end = 0.0, prev_f_end = 0.0;
    bool have_prev = false;

    for (auto& fb : branches) {
        const Index m = fb.curve.t_nodes.size();
        Vec w = cumulative_work(fb);
        if (have_prev) {
            // Value continuity across the turning gap: trapezoid bridge over
            // the (tiny) excluded interval.
            const double q_start = fb.curve.q_nodes[0];
            offset += 0.5 * (prev_f_end + fb.force_nodes[0]) * (q_start - prev_q_end);
        }
        w.array() += offset;
        offset = w[m - 1];
        prev_q_end = fb.curve.q_nodes[m - 1];
        prev_f_end = fb.force_nodes[m - 1];
        have_prev = true;

        WorkPotential::Branch branch;
        if (fb.curve.increasing) {
            branch.q_ascending = fb.curve.q_nodes;
            branch.w_ascending = w;
            branch.f_ascending = fb.force_nodes;
        } else {
            branch.q_ascending = fb.curve.q_nodes.reverse();
            branch.w_ascending = w.reverse();
            branch.f_ascending = fb.force_nodes.reverse();
        }
        branch.force = std::move(fb);
        pot.branches_.push_back(std::move(branch));
    }

    const double w_anchor = pot.value(q_i0, 0);
    for (auto& b : pot.branches_) b.w_ascending.array() -= w_anchor;
    return pot;
}

} // namespace detail

// ---------------------------------------------------------------------------
// SubstituteSystem
// ---------------------------------------------------------------------------

SubstituteSystem::SubstituteSystem(SystemDefinition conservative_base,
                                   std::vector<WorkPotential> potentials)
    : base_(std::move(conservative_base)), potentials_(std::move(potentials)) {
    if (!base_.is_conservative())
        throw std::invalid_argument("SubstituteSystem: base must be conservative");
    if (static_cast<int>(potentials_.size()) != base_.dim())
        throw std::invalid_argument("SubstituteSystem: one work potential per coordinate");
    for (int i = 0; i < base_.dim(); ++i)
        if (potentials_[i].coord() != i)
            throw std::invalid_argument("SubstituteSystem: potential coordinate mismatch");
}

namespace {

int branch_of(const BranchSelect& branches, int coord) {
    if (branches.empty()) return 0;
    return branches.at(coord);
}

} // namespace

double SubstituteSystem::hamiltonian(const Vec& q, const Vec& p,
                                     const BranchSelect& branches) const {
    double h = 0.5 * p.dot(base_.mass_inverse() * p) + base_.potential(q);
    for (int i = 0; i < dim(); ++i) h -= potentials_[i].value(q[i], branch_of(branches, i));
    return h;
}

Vec SubstituteSystem::grad_q(const Vec& q, const BranchSelect& branches) const {
    Vec g = base_.potential_grad(q);
    for (int i = 0; i < dim(); ++i) g[i] -= potentials_[i].force(q[i], branch_of(branches, i));
    return g;
}

Vec SubstituteSystem::grad_p(const Vec& p) const { return base_.mass_inverse() * p; }

Mat SubstituteSystem::grad_q_jacobian(const Vec& q, const BranchSelect& branches) const {
    Mat j;
    if (base_.linear_family()) {
        j = base_.stiffness();
    } else {
        j = Mat(dim(), dim());
        for (int c = 0; c < dim(); ++c) {
            const double h = std::max(1e-6, 1e-6 * std::abs(q[c]));
            Vec qp = q, qm = q;
            qp[c] += h;
            qm[c] -= h;
            j.col(c) = (base_.potential_grad(qp) - base_.potential_grad(qm)) / (2.0 * h);
        }
    }
    for (int i = 0; i < dim(); ++i)
        j(i, i) -= potentials_[i].force_slope(q[i], branch_of(branches, i));
    return j;
}

double SubstituteSystem::reconstructed_force(int coord, double q, int branch) const {
    return potentials_.at(coord).force(q, branch);
}

BranchSelect SubstituteSystem::branches_at_time(double t) const {
    BranchSelect out(dim(), 0);
    for (int i = 0; i < dim(); ++i) out[i] = potentials_[i].branch_at_time(t);
    return out;
}

SubstituteSystem build_substitute(const SystemDefinition& sys,
                                  std::vector<WorkPotential> potentials) {
    return SubstituteSystem(sys.without_damping(), std::move(potentials));
}

// ---------------------------------------------------------------------------
// EquivalentStiffness
// ---------------------------------------------------------------------------

double EquivalentStiffness::rho(int i, int j, double q, int branch) const {
    const RowBranch& rb = rows_.at(i).at(branch);
    const double t = rb.curve.time_of(q);
    return damping_(i, j) * rb.curve.dense->qdot(t, j);
}

double EquivalentStiffness::rho_row_sum(int i, double q, int branch) const {
    const RowBranch& rb = rows_.at(i).at(branch);
    const double t = rb.curve.time_of(q);
    double sum = 0.0;
    for (int j = 0; j < n_; ++j) sum += damping_(i, j) * rb.curve.dense->qdot(t, j);
    return sum;
}

double EquivalentStiffness::kappa(int i, int j, double q, int branch) const {
    if (std::abs(q) <= eps_div_.at(i))
        throw std::domain_error("kappa: |q_i| inside the eps_div exclusion window");
    return rho(i, j, q, branch) / q;
}

double EquivalentStiffness::ktilde_diag(int i, double q, int branch) const {
    if (std::abs(q) <= eps_div_.at(i))
        throw std::domain_error("ktilde_diag: |q_i| inside the eps_div exclusion window");
    return rho_row_sum(i, q, branch) / q;
}

EquivalentStiffness equivalent_stiffness(const Trajectory& traj, const SystemDefinition& sys,
                                         double eps_div, double eps_turn, int nodes) {
    if (!sys.linear_family())
        throw std::invalid_argument("equivalent_stiffness: linear-family system required");
    const int n = sys.dim();
    const Mat C = sys.has_damping_matrix() ? sys.damping() : Mat::Zero(n, n);

    EquivalentStiffness eq;
    eq.n_ = n;
    eq.damping_ = C;
    eq.rows_.resize(n);
    eq.eps_div_.resize(n);

    auto law = [C](const Vec&, const Vec& qd) -> Vec { return -C * qd; };

    for (int i = 0; i < n; ++i) {
        double qmax = 0.0;
        for (const State& s : traj.samples) qmax = std::max(qmax, std::abs(s.q[i]));
        eq.eps_div_[i] = eps_div > 0.0 ? eps_div : 1e-6 * qmax;
        if (qmax <= eq.eps_div_[i])
            throw ThresholdError("equivalent_stiffness: division window empty for coordinate " +
                                 std::to_string(i));

        const auto segments = segment_monotone(traj, i, eps_turn, nodes);
        const auto direct = reconstruct_force(traj, sys, i, segments);

        std::vector<ForceBranch> row_force;
        for (const auto& seg : segments) {
            EquivalentStiffness::RowBranch rb;
            rb.curve = make_branch_curve(seg);
            const Index m = rb.curve.t_nodes.size();
            rb.rho_nodes = Mat(m, n);
            for (Index k = 0; k < m; ++k) {
                const Vec qd = seg.dense->qdot(rb.curve.t_nodes[k]);
                for (int j = 0; j < n; ++j) rb.rho_nodes(k, j) = C(i, j) * qd[j];
            }

            // Σⱼ ρᵢⱼ = −𝓕ᵢ, checked against the direct reconstruction.
            for (Index k = 0; k < m; ++k) {
                const double rowsum = rb.rho_nodes.row(k).sum();
                const double direct_f = direct.value(rb.curve.q_nodes[k], rb.curve.branch_id);
                eq.max_force_mismatch_ =
                    std::max(eq.max_force_mismatch_, std::abs(rowsum + direct_f));
            }

            // The ρ-route force branch: 𝓕ᵢ tabulated as −Σⱼ ρᵢⱼ.
            ForceBranch fb;
            fb.curve = rb.curve;
            fb.force_nodes = -rb.rho_nodes.rowwise().sum();
            fb.force_seed = Pchip(fb.curve.q_nodes, fb.force_nodes);
            fb.pad = 0.05 * (fb.curve.q_hi - fb.curve.q_lo);
            fb.force_law = law;
            fb.max_residual = 0.0;
            row_force.push_back(std::move(fb));

            eq.rows_[i].push_back(std::move(rb));
        }
        eq.potentials_.push_back(
            detail::build_work_potential(i, traj.ic.q[i], std::move(row_force)));
    }
    return eq;
}

} // namespace consub
