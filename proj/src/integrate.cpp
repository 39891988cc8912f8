#include "consub/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace consub {

Method method_from_string(const std::string& name) {
    if (name == "rk4-fixed") return Method::Rk4Fixed;
    if (name == "rk45-adaptive") return Method::Rk45Adaptive;
    if (name == "stormer-verlet") return Method::StormerVerlet;
    if (name == "implicit-midpoint") return Method::ImplicitMidpoint;
    throw std::invalid_argument("unknown integrator method: " + name);
}

std::string to_string(Method method) {
    switch (method) {
        case Method::Rk4Fixed: return "rk4-fixed";
        case Method::Rk45Adaptive: return "rk45-adaptive";
        case Method::StormerVerlet: return "stormer-verlet";
        case Method::ImplicitMidpoint: return "implicit-midpoint";
    }
    return "?";
}

bool is_symplectic(Method method) {
    return method == Method::StormerVerlet || method == Method::ImplicitMidpoint;
}

void IntegratorConfig::validate() const {
    if (!(t_end > 0.0)) throw std::invalid_argument("IntegratorConfig: t_end must be positive");
    if (max_steps <= 0) throw std::invalid_argument("IntegratorConfig: max_steps must be positive");
    if (samples < 2) throw std::invalid_argument("IntegratorConfig: need at least 2 samples");
    if (method == Method::Rk4Fixed || is_symplectic(method)) {
        if (!(step > 0.0))
            throw std::invalid_argument("IntegratorConfig: fixed-step methods need step > 0");
    } else {
        if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
            throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
    }
}

namespace {

// First-order phase-space field ż = f(z), z = (q, p), with optional Jacobian.
struct PhaseField {
    int n = 0;
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> jac;
};

PhaseField make_field(const SystemDefinition& sys) {
    PhaseField field;
    const int n = sys.dim();
    field.n = n;
    auto sp = std::make_shared<const SystemDefinition>(sys);
    field.f = [sp, n](const Vec& z) {
        const Vec q = z.head(n);
        const Vec qd = sp->qdot_of(z.tail(n));
        Vec out(2 * n);
        out.head(n) = qd;
        out.tail(n) = -sp->potential_grad(q) + sp->force(q, qd);
        return out;
    };
    if (sys.linear_family()) {
        Mat a = Mat::Zero(2 * n, 2 * n);
        a.topRightCorner(n, n) = sys.mass_inverse();
        a.bottomLeftCorner(n, n) = -sys.stiffness();
        if (sys.has_damping_matrix())
            a.bottomRightCorner(n, n) = -sys.damping() * sys.mass_inverse();
        field.jac = [a](const Vec&) { return a; };
    }
    return field;
}

PhaseField make_field(const SubstituteSystem& sub, const BranchSelect& branches) {
    PhaseField field;
    const int n = sub.dim();
    field.n = n;
    auto sp = std::make_shared<const SubstituteSystem>(sub);
    auto br = branches;
    field.f = [sp, br, n](const Vec& z) {
        Vec out(2 * n);
        out.head(n) = sp->grad_p(z.tail(n));
        out.tail(n) = -sp->grad_q(z.head(n), br);
        return out;
    };
    field.jac = [sp, br, n](const Vec& z) {
        Mat a = Mat::Zero(2 * n, 2 * n);
        a.topRightCorner(n, n) = sp->base().mass_inverse();
        a.bottomLeftCorner(n, n) = -sp->grad_q_jacobian(z.head(n), br);
        return a;
    };
    return field;
}

// Central-difference Jacobian, h = max(1e-6, 1e-6 |x|) per component.
void add_fd_jacobian(PhaseField& field) {
    auto f = field.f;
    const int dim = 2 * field.n;
    field.jac = [f, dim](const Vec& z) {
        Mat j(dim, dim);
        for (int c = 0; c < dim; ++c) {
            const double h = std::max(1e-6, 1e-6 * std::abs(z[c]));
            Vec zp = z, zm = z;
            zp[c] += h;
            zm[c] -= h;
            j.col(c) = (f(zp) - f(zm)) / (2.0 * h);
        }
        return j;
    };
}

struct StepRecord {
    std::vector<double> t;
    std::vector<Vec> y, dy;
    long accepted = 0, rejected = 0, evals = 0;
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = 0.0;
};

void record_node(StepRecord& rec, double t, const Vec& y, const Vec& dy) {
    rec.t.push_back(t);
    rec.y.push_back(y);
    rec.dy.push_back(dy);
}

// Dormand-Prince 5(4) with FSAL and a standard PI-free step controller.
void dopri5(const std::function<Vec(const Vec&)>& f, Vec y, double t0, double t1, double atol,
            double rtol, long max_steps, double max_step, StepRecord& rec) {
    // Stage times are not needed: every field in this library is autonomous.
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double span = t1 - t0;
    double t = t0;
    Vec k1 = f(y);
    ++rec.evals;
    record_node(rec, t, y, k1);

    double h = std::min(max_step, span / 100.0);
    const double h_floor = 1e-14 * std::max(1.0, std::abs(span));
    long steps = 0;

    while (t < t1) {
        if (++steps > max_steps) throw std::runtime_error("dopri5: max_steps exceeded");
        bool last = false;
        if (h >= t1 - t) {
            h = t1 - t;
            last = true;
        }
        if (h < h_floor) throw std::runtime_error("dopri5: step size underflow");

        const Vec k2 = f(y + h * (a21 * k1));
        const Vec k3 = f(y + h * (a31 * k1 + a32 * k2));
        const Vec k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = f(y_new);
        rec.evals += 6;

        const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double norm2 = 0.0;
        for (Index i = 0; i < y.size(); ++i) {
            const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            const double r = err[i] / scale;
            norm2 += r * r;
        }
        const double err_norm = std::sqrt(norm2 / static_cast<double>(y.size()));

        if (err_norm <= 1.0) {
            t = last ? t1 : t + h;  // land on the endpoint exactly
            y = y_new;
            k1 = k7;  // FSAL
            ++rec.accepted;
            rec.h_min = std::min(rec.h_min, h);
            rec.h_max = std::max(rec.h_max, h);
            record_node(rec, t, y, k1);
            if (!y.allFinite()) throw std::runtime_error("dopri5: non-finite state");
            // Conservative safety factor: long-horizon drift stays well under
            // 100x the local tolerance.
            const double grow = err_norm > 0.0 ? 0.75 * std::pow(err_norm, -0.2) : 5.0;
            h = std::min(max_step, h * std::clamp(grow, 0.2, 5.0));
        } else {
            ++rec.rejected;
            h *= std::clamp(0.75 * std::pow(err_norm, -0.2), 0.2, 0.9);
        }
    }
}

void rk4_fixed(const std::function<Vec(const Vec&)>& f, Vec y, double t0, double t1, double step,
               long max_steps, long keep_every, StepRecord& rec) {
    const double span = t1 - t0;
    const long n_steps = static_cast<long>(std::ceil(span / step - 1e-12));
    if (n_steps > max_steps) throw std::runtime_error("rk4: max_steps exceeded");
    const double h = span / static_cast<double>(n_steps);

    Vec k1 = f(y);
    ++rec.evals;
    record_node(rec, t0, y, k1);
    rec.h_min = rec.h_max = h;

    for (long s = 1; s <= n_steps; ++s) {
        const Vec k2 = f(y + (0.5 * h) * k1);
        const Vec k3 = f(y + (0.5 * h) * k2);
        const Vec k4 = f(y + h * k3);
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rec.evals += 3;
        const double t = s == n_steps ? t1 : t0 + h * static_cast<double>(s);
        if (!y.allFinite()) throw std::runtime_error("rk4: non-finite state");
        k1 = f(y);
        ++rec.evals;
        ++rec.accepted;
        if (s % keep_every == 0 || s == n_steps) record_node(rec, t, y, k1);
    }
}

std::shared_ptr<const DenseOutput> build_dense(const SystemDefinition& sys, const StepRecord& rec) {
    const int n = sys.dim();
    std::vector<Vec> qdd;
    qdd.reserve(rec.t.size());
    for (const Vec& dy : rec.dy) qdd.push_back(sys.mass_inverse() * dy.tail(n));
    return std::make_shared<DenseOutput>(n, rec.t, rec.y, rec.dy, std::move(qdd));
}

std::vector<State> sample_grid(const DenseOutput& dense, const State& ic, int samples) {
    const double t0 = dense.t_front();
    const double t1 = dense.t_back();
    std::vector<State> out;
    out.reserve(samples);
    out.push_back(ic);  // bit-exact initial condition
    for (int k = 1; k < samples; ++k) {
        const double t = t0 + (t1 - t0) * static_cast<double>(k) / (samples - 1);
        out.push_back(dense.state_at(t));
    }
    return out;
}

long thinning(long total_steps, int samples) {
    const long target = std::max<long>(4L * samples, 20000);
    return std::max<long>(1, total_steps / target);
}

} // namespace

Trajectory integrate(const SystemDefinition& sys, const State& ic, const IntegratorConfig& cfg) {
    cfg.validate();
    if (cfg.method != Method::Rk4Fixed && cfg.method != Method::Rk45Adaptive)
        throw std::invalid_argument(
            "integrate: dissipative systems use rk4-fixed or rk45-adaptive");
    if (ic.q.size() != sys.dim() || ic.p.size() != sys.dim())
        throw std::invalid_argument("integrate: initial condition dimension mismatch");
    if (!ic.q.allFinite() || !ic.p.allFinite())
        throw std::invalid_argument("integrate: non-finite initial condition");
    if (!(cfg.t_end > ic.t))
        throw std::invalid_argument("integrate: t_end must exceed the initial time");

    PhaseField field = make_field(sys);
    Vec z0(2 * sys.dim());
    z0 << ic.q, ic.p;

    StepRecord rec;
    if (cfg.method == Method::Rk45Adaptive) {
        const double cap = cfg.max_step > 0.0 ? cfg.max_step : (cfg.t_end - ic.t) / 50.0;
        dopri5(field.f, z0, ic.t, cfg.t_end, cfg.abs_tol, cfg.rel_tol, cfg.max_steps, cap, rec);
    } else {
        const long keep = thinning(static_cast<long>((cfg.t_end - ic.t) / cfg.step) + 1,
                                   cfg.samples);
        rk4_fixed(field.f, z0, ic.t, cfg.t_end, cfg.step, cfg.max_steps, keep, rec);
    }

    Trajectory traj;
    traj.ic = ic;
    traj.dense = build_dense(sys, rec);
    traj.samples = sample_grid(*traj.dense, ic, cfg.samples);
    traj.meta.method = to_string(cfg.method);
    traj.meta.abs_tol = cfg.abs_tol;
    traj.meta.rel_tol = cfg.rel_tol;
    traj.meta.step = cfg.step;
    traj.meta.accepted = rec.accepted;
    traj.meta.rejected = rec.rejected;
    traj.meta.rhs_evals = rec.evals;
    traj.meta.h_min = rec.h_min;
    traj.meta.h_max = rec.h_max;
    return traj;
}

namespace {

struct SubstituteDense {
    // Conservative base needed for q̈ nodes and p-derivative nodes.
    const SubstituteSystem& sub;
    const BranchSelect& branches;

    Vec derivative(const Vec& z) const {
        const int n = sub.dim();
        Vec dz(2 * n);
        dz.head(n) = sub.grad_p(z.tail(n));
        dz.tail(n) = -sub.grad_q(z.head(n), branches);
        return dz;
    }
};

} // namespace

Trajectory integrate_hamiltonian(const SubstituteSystem& substitute, const State& ic,
                                 const IntegratorConfig& cfg, const BranchSelect& branches) {
    cfg.validate();
    if (!is_symplectic(cfg.method))
        throw std::invalid_argument(
            "integrate_hamiltonian: use stormer-verlet or implicit-midpoint");
    const int n = substitute.dim();
    if (ic.q.size() != n || ic.p.size() != n)
        throw std::invalid_argument("integrate_hamiltonian: dimension mismatch");
    if (!(cfg.t_end > ic.t))
        throw std::invalid_argument("integrate_hamiltonian: t_end must exceed the initial time");

    const double span = cfg.t_end - ic.t;
    const long n_steps = static_cast<long>(std::ceil(span / cfg.step - 1e-12));
    if (n_steps > cfg.max_steps)
        throw std::runtime_error("integrate_hamiltonian: max_steps exceeded");
    const double h = span / static_cast<double>(n_steps);
    const long keep = thinning(n_steps, cfg.samples);
    const Mat& minv = substitute.base().mass_inverse();

    StepRecord rec;
    rec.h_min = rec.h_max = h;
    std::string note;
    std::unique_ptr<DomainExit> exit_event;

    Vec q = ic.q, p = ic.p;
    auto record_state = [&](double t, const Vec& qq, const Vec& pp, const Vec& grad) {
        Vec z(2 * n), dz(2 * n);
        z << qq, pp;
        dz.head(n) = minv * pp;
        dz.tail(n) = -grad;
        record_node(rec, t, z, dz);
    };

    if (cfg.method == Method::StormerVerlet) {
        Vec grad = substitute.grad_q(q, branches);  // throws DomainExit if ic is off-domain
        ++rec.evals;
        record_state(ic.t, q, p, grad);
        for (long s = 1; s <= n_steps; ++s) {
            try {
                const Vec p_half = p - (0.5 * h) * grad;
                const Vec q_new = q + h * (minv * p_half);
                const Vec grad_new = substitute.grad_q(q_new, branches);
                ++rec.evals;
                p = p_half - (0.5 * h) * grad_new;
                q = q_new;
                grad = grad_new;
            } catch (const DomainExit& e) {
                std::ostringstream os;
                os << "domain-exit at t=" << ic.t + h * static_cast<double>(s) << ": " << e.what();
                note = os.str();
                exit_event = std::make_unique<DomainExit>(e);
                break;
            }
            ++rec.accepted;
            const double t = ic.t + h * static_cast<double>(s);
            if (!q.allFinite() || !p.allFinite())
                throw std::runtime_error("integrate_hamiltonian: non-finite state");
            if (s % keep == 0 || s == n_steps) record_state(t, q, p, grad);
        }
        if (!note.empty()) {
            const double t_last = ic.t + h * static_cast<double>(rec.accepted);
            if (rec.t.back() < t_last) record_state(t_last, q, p, grad);
        }
    } else {
        // Implicit midpoint by fixed-point iteration with a Newton fallback.
        PhaseField field = make_field(substitute, branches);
        Vec z(2 * n);
        z << q, p;
        Vec dz = field.f(z);
        ++rec.evals;
        record_node(rec, ic.t, z, dz);
        for (long s = 1; s <= n_steps; ++s) {
            try {
                Vec w = z + h * dz;  // explicit predictor
                bool converged = false;
                for (int it = 0; it < 50 && !converged; ++it) {
                    const Vec w_next = z + h * field.f(0.5 * (z + w));
                    ++rec.evals;
                    converged = (w_next - w).lpNorm<Eigen::Infinity>() <=
                                1e-12 * (1.0 + w.lpNorm<Eigen::Infinity>());
                    w = w_next;
                }
                if (!converged) {
                    int newton_its = 0;
                    for (; newton_its < 25; ++newton_its) {
                        const Vec mid = 0.5 * (z + w);
                        const Vec g = w - z - h * field.f(mid);
                        ++rec.evals;
                        if (g.lpNorm<Eigen::Infinity>() <=
                            1e-12 * (1.0 + w.lpNorm<Eigen::Infinity>())) {
                            converged = true;
                            break;
                        }
                        const Mat jac = Mat::Identity(2 * n, 2 * n) - (0.5 * h) * field.jac(mid);
                        w -= jac.partialPivLu().solve(g);
                    }
                    if (!converged) {
                        std::ostringstream os;
                        os << "implicit midpoint failed to converge (50 fixed-point + "
                           << newton_its << " Newton iterations)";
                        throw std::runtime_error(os.str());
                    }
                }
                z = w;
                dz = field.f(z);
                ++rec.evals;
            } catch (const DomainExit& e) {
                std::ostringstream os;
                os << "domain-exit at t=" << ic.t + h * static_cast<double>(s) << ": " << e.what();
                note = os.str();
                exit_event = std::make_unique<DomainExit>(e);
                break;
            }
            ++rec.accepted;
            const double t = ic.t + h * static_cast<double>(s);
            if (!z.allFinite()) throw std::runtime_error("integrate_hamiltonian: non-finite state");
            if (s % keep == 0 || s == n_steps) record_node(rec, t, z, dz);
        }
        if (!note.empty()) {
            const double t_last = ic.t + h * static_cast<double>(rec.accepted);
            if (rec.t.back() < t_last) record_node(rec, t_last, z, dz);
        }
    }

    if (rec.t.size() < 2) {
        if (exit_event) throw *exit_event;  // exited before completing a single step
        throw std::runtime_error("integrate_hamiltonian: no steps taken");
    }

    Trajectory traj;
    traj.ic = ic;
    traj.dense = build_dense(substitute.base(), rec);
    traj.samples = sample_grid(*traj.dense, ic, cfg.samples);
    traj.meta.method = to_string(cfg.method);
    traj.meta.step = h;
    traj.meta.accepted = rec.accepted;
    traj.meta.rhs_evals = rec.evals;
    traj.meta.h_min = rec.h_min;
    traj.meta.h_max = rec.h_max;
    traj.meta.note = note;
    return traj;
}

namespace {

MonodromyTrajectory monodromy_impl(const SystemDefinition& base_for_dense, PhaseField field,
                                   const State& ic, const IntegratorConfig& cfg) {
    cfg.validate();
    if (cfg.method != Method::Rk4Fixed && cfg.method != Method::Rk45Adaptive)
        throw std::invalid_argument(
            "integrate_with_monodromy: use rk4-fixed or rk45-adaptive");
    if (!(cfg.t_end > ic.t))
        throw std::invalid_argument("integrate_with_monodromy: t_end must exceed initial time");
    const int n = field.n;
    const int zdim = 2 * n;
    const int dim = zdim + zdim * zdim;

    // Augmented field: state plus the variational block Y' = Df(z) Y.
    auto f_aug = [&field, zdim](const Vec& y) {
        const Vec z = y.head(zdim);
        const Mat Y = Eigen::Map<const Mat>(y.data() + zdim, zdim, zdim);
        const Mat dY = field.jac(z) * Y;
        Vec out(y.size());
        out.head(zdim) = field.f(z);
        Eigen::Map<Mat>(out.data() + zdim, zdim, zdim) = dY;
        return out;
    };

    Vec z(zdim);
    z << ic.q, ic.p;

    StepRecord base_rec;
    std::vector<double> dets(cfg.samples, 1.0);
    std::vector<State> samples;
    samples.reserve(cfg.samples);
    samples.push_back(ic);

    double logdet = 0.0;
    long accepted = 0, rejected = 0, evals = 0;
    const double span = cfg.t_end - ic.t;
    const double cap = cfg.max_step > 0.0 ? cfg.max_step : span / 50.0;

    for (int k = 0; k + 1 < cfg.samples; ++k) {
        const double ta = ic.t + span * static_cast<double>(k) / (cfg.samples - 1);
        const double tb = ic.t + span * static_cast<double>(k + 1) / (cfg.samples - 1);

        Vec y(dim);
        y.head(zdim) = z;
        Eigen::Map<Mat>(y.data() + zdim, zdim, zdim) = Mat::Identity(zdim, zdim);

        StepRecord rec;
        if (cfg.method == Method::Rk45Adaptive) {
            dopri5(f_aug, y, ta, tb, cfg.abs_tol, cfg.rel_tol, cfg.max_steps,
                   std::min(cap, tb - ta), rec);
        } else {
            rk4_fixed(f_aug, y, ta, tb, cfg.step, cfg.max_steps, 1, rec);
        }
        accepted += rec.accepted;
        rejected += rec.rejected;
        evals += rec.evals;

        // Collect base-state nodes for the dense output (skip duplicated start).
        for (std::size_t m = (k == 0 ? 0 : 1); m < rec.t.size(); ++m) {
            base_rec.t.push_back(rec.t[m]);
            base_rec.y.push_back(rec.y[m].head(zdim));
            base_rec.dy.push_back(rec.dy[m].head(zdim));
        }
        base_rec.h_min = std::min(base_rec.h_min, rec.h_min);
        base_rec.h_max = std::max(base_rec.h_max, rec.h_max);

        const Vec y_end = rec.y.back();
        z = y_end.head(zdim);
        const Mat Y = Eigen::Map<const Mat>(y_end.data() + zdim, zdim, zdim);
        const double det = Y.partialPivLu().determinant();
        if (!(det > 0.0) || !std::isfinite(det))
            throw std::runtime_error("integrate_with_monodromy: non-positive window determinant");
        logdet += std::log(det);
        dets[k + 1] = std::exp(logdet);

        State s;
        s.t = tb;
        s.q = z.head(n);
        s.p = z.tail(n);
        samples.push_back(std::move(s));
    }

    MonodromyTrajectory out;
    out.base.ic = ic;
    out.base.samples = std::move(samples);
    out.base.dense = build_dense(base_for_dense, base_rec);
    out.base.meta.method = to_string(cfg.method) + "+variational";
    out.base.meta.abs_tol = cfg.abs_tol;
    out.base.meta.rel_tol = cfg.rel_tol;
    out.base.meta.step = cfg.step;
    out.base.meta.accepted = accepted;
    out.base.meta.rejected = rejected;
    out.base.meta.rhs_evals = evals;
    out.base.meta.h_min = base_rec.h_min;
    out.base.meta.h_max = base_rec.h_max;
    out.jacobian_dets = std::move(dets);
    return out;
}

} // namespace

MonodromyTrajectory integrate_with_monodromy(const SystemDefinition& sys, const State& ic,
                                             const IntegratorConfig& cfg, bool allow_fd_jacobian) {
    PhaseField field = make_field(sys);
    if (!field.jac) {
        if (!allow_fd_jacobian)
            throw std::invalid_argument(
                "integrate_with_monodromy: Jacobian unavailable and finite differences disabled");
        add_fd_jacobian(field);
    }
    return monodromy_impl(sys, std::move(field), ic, cfg);
}

MonodromyTrajectory integrate_with_monodromy(const SubstituteSystem& substitute, const State& ic,
                                             const IntegratorConfig& cfg,
                                             const BranchSelect& branches) {
    return monodromy_impl(substitute.base(), make_field(substitute, branches), ic, cfg);
}

namespace {

std::vector<double> trace_route_impl(const PhaseField& field, const Trajectory& traj) {
    if (!traj.dense) throw std::invalid_argument("trace_determinant_route: no dense output");
    auto trace_at = [&](double t) {
        const Vec z = traj.dense->state(t);
        return field.jac(z).trace();
    };
    std::vector<double> out;
    out.reserve(traj.samples.size());
    out.push_back(1.0);
    double integral = 0.0;
    double tr_prev = trace_at(traj.samples.front().t);
    for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
        const double ta = traj.samples[k].t;
        const double tb = traj.samples[k + 1].t;
        const double tm = 0.5 * (ta + tb);
        const double tr_mid = trace_at(tm);
        const double tr_next = trace_at(tb);
        const double coarse = 0.5 * (tb - ta) * (tr_prev + tr_next);
        const double fine =
            0.5 * (tm - ta) * (tr_prev + tr_mid) + 0.5 * (tb - tm) * (tr_mid + tr_next);
        integral += fine + (fine - coarse) / 3.0;
        tr_prev = tr_next;
        out.push_back(std::exp(integral));
    }
    return out;
}

} // namespace

std::vector<double> trace_determinant_route(const SystemDefinition& sys, const Trajectory& traj,
                                            bool allow_fd_jacobian) {
    PhaseField field = make_field(sys);
    if (!field.jac) {
        if (!allow_fd_jacobian)
            throw std::invalid_argument(
                "trace_determinant_route: Jacobian unavailable and finite differences disabled");
        add_fd_jacobian(field);
    }
    return trace_route_impl(field, traj);
}

std::vector<double> trace_determinant_route(const SubstituteSystem& substitute,
                                            const Trajectory& traj, const BranchSelect& branches) {
    return trace_route_impl(make_field(substitute, branches), traj);
}

} // namespace consub
