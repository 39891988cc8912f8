#include "consub/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace consub {

void AuditReport::finalize() {
    pass = true;
    for (const Metric& m : metrics)
        if (m.checked && !(m.value <= m.tolerance)) pass = false;
}

AuditReport check_coincidence(const Trajectory& orig, const Trajectory& subst, double tol,
                              int grid) {
    AuditReport report;
    report.name = "coincidence";
    report.trajectory_digests = {trajectory_hash(orig), trajectory_hash(subst)};

    const double t0 = std::max(orig.t_begin(), subst.t_begin());
    const double t1 = std::min(orig.t_end(), subst.t_end());
    if (!(t1 > t0)) throw std::invalid_argument("check_coincidence: disjoint time windows");

    double sup = 0.0;
    for (int k = 0; k < grid; ++k) {
        const double t = t0 + (t1 - t0) * static_cast<double>(k) / (grid - 1);
        const Vec za = orig.dense->state(t);
        const Vec zb = subst.dense->state(t);
        sup = std::max(sup, (za - zb).lpNorm<Eigen::Infinity>());
    }
    report.metrics.push_back({"phase_sup_norm", sup, tol, true});
    report.metrics.push_back({"window_begin", t0, 0.0, false});
    report.metrics.push_back({"window_end", t1, 0.0, false});
    report.finalize();
    return report;
}

std::vector<Vec> default_perturbations(const State& ic, double delta) {
    const int n = static_cast<int>(ic.q.size());
    std::vector<Vec> out;
    for (int i = 0; i < 2 * n; ++i) {
        const double base = i < n ? ic.q[i] : ic.p[i - n];
        const double d = delta * std::max(1.0, std::abs(base));
        for (double sgn : {+1.0, -1.0}) {
            Vec dv = Vec::Zero(2 * n);
            dv[i] = sgn * d;
            out.push_back(dv);
        }
    }
    return out;
}

AuditReport uniqueness_probe(const SystemDefinition& sys, const SubstituteSystem& substitute,
                             const State& ic, const std::vector<Vec>& perturbations,
                             double tol_div, const IntegratorConfig& dissipative_cfg,
                             const IntegratorConfig& substitute_cfg, double coincidence_tol) {
    for (const Vec& d : perturbations)
        if (d.isZero(0.0))
            throw std::invalid_argument("uniqueness_probe: perturbations must be nonzero");

    AuditReport report;
    report.name = "uniqueness";
    const int n = sys.dim();

    // Unperturbed pair must coincide.
    const Trajectory base_orig = integrate(sys, ic, dissipative_cfg);
    const Trajectory base_subst = integrate_hamiltonian(substitute, ic, substitute_cfg);
    {
        const AuditReport coin = check_coincidence(base_orig, base_subst, coincidence_tol);
        report.metrics.push_back(
            {"unperturbed_sup_norm", coin.metrics.front().value, coincidence_tol, true});
    }

    double min_divergence = std::numeric_limits<double>::infinity();
    int exited = 0;
    for (std::size_t k = 0; k < perturbations.size(); ++k) {
        const Vec& d = perturbations[k];
        State pic = ic;
        pic.q += d.head(n);
        pic.p += d.tail(n);

        const Trajectory orig = integrate(sys, pic, dissipative_cfg);
        bool domain_exit = false;
        double sup = 0.0;
        try {
            const Trajectory subst = integrate_hamiltonian(substitute, pic, substitute_cfg);
            domain_exit = !subst.meta.note.empty();
            const double t0 = std::max(orig.t_begin(), subst.t_begin());
            const double t1 = std::min(orig.t_end(), subst.t_end());
            for (int g = 0; g < 501; ++g) {
                const double t = t0 + (t1 - t0) * static_cast<double>(g) / 500.0;
                sup = std::max(sup,
                               (orig.dense->state(t) - subst.dense->state(t))
                                   .lpNorm<Eigen::Infinity>());
            }
        } catch (const DomainExit&) {
            // The perturbed initial state is not even inside the substitute's
            // domain: non-coincidence is immediate.
            domain_exit = true;
        }

        const bool diverged = sup >= tol_div || domain_exit;
        if (domain_exit) ++exited;
        if (!domain_exit || sup > 0.0) min_divergence = std::min(min_divergence, sup);

        // Divergence is a lower bound, so the checked metric is the deficit
        // against tol_div (0 when the probe diverged far enough).
        std::ostringstream name;
        name << "probe_" << k;
        report.metrics.push_back(
            {name.str() + "_divergence_deficit", diverged ? 0.0 : tol_div - sup, 0.0, true});
        report.metrics.push_back({name.str() + "_divergence", sup, 0.0, false});
    }
    if (!std::isfinite(min_divergence)) min_divergence = 0.0;
    report.metrics.push_back({"min_divergence", min_divergence, 0.0, false});
    if (exited > 0) {
        std::ostringstream os;
        os << exited << " probe(s) left the reconstructed domain (counted as diverged)";
        report.note = os.str();
    }
    report.finalize();
    return report;
}

AuditReport hamiltonian_constancy(const SubstituteSystem& substitute, const Trajectory& orig,
                                  double tol) {
    AuditReport report;
    report.name = "hamiltonian-constancy";
    report.trajectory_digests = {trajectory_hash(orig)};

    bool have_ref = false;
    double href = 0.0;
    double worst = 0.0;
    int evaluated = 0;
    for (const State& s : orig.samples) {
        const BranchSelect branches = substitute.branches_at_time(s.t);
        double h = 0.0;
        try {
            h = substitute.hamiltonian(s.q, s.p, branches);
        } catch (const DomainExit&) {
            continue;  // sample inside a turning-point gap beyond every pad
        }
        ++evaluated;
        if (!have_ref) {
            href = h;
            have_ref = true;
            continue;
        }
        worst = std::max(worst, std::abs(h - href));
    }
    if (!have_ref)
        throw DomainExit(0, 0, orig.ic.q[0], 0.0, 0.0);

    report.metrics.push_back({"hhat_deviation", worst, tol, true});
    report.metrics.push_back({"hhat_value", href, 0.0, false});
    report.metrics.push_back({"samples_evaluated", static_cast<double>(evaluated), 0.0, false});
    report.finalize();
    return report;
}

namespace {

AuditReport volume_audit_impl(const MonodromyTrajectory& mono, const std::vector<double>& oracle,
                              double tol, bool assert_unit) {
    AuditReport report;
    report.name = assert_unit ? "volume-substitute" : "volume-dissipative";
    report.trajectory_digests = {trajectory_hash(mono.base)};

    double worst_rel = 0.0;
    double worst_unit = 0.0;
    for (std::size_t k = 0; k < mono.jacobian_dets.size(); ++k) {
        const double det = mono.jacobian_dets[k];
        const double ref = oracle[k];
        worst_rel = std::max(worst_rel, std::abs(det - ref) / std::abs(ref));
        if (assert_unit) worst_unit = std::max(worst_unit, std::abs(det - 1.0));
    }
    report.metrics.push_back({"det_vs_trace_route_rel", worst_rel, tol, true});
    if (assert_unit) report.metrics.push_back({"det_vs_unity", worst_unit, tol, true});
    report.metrics.push_back(
        {"det_final", mono.jacobian_dets.back(), 0.0, false});
    report.finalize();
    return report;
}

} // namespace

AuditReport volume_audit(const SystemDefinition& sys, const State& ic, double t_end, double tol,
                         const IntegratorConfig& cfg) {
    IntegratorConfig run = cfg;
    run.t_end = t_end;
    const MonodromyTrajectory mono = integrate_with_monodromy(sys, ic, run);
    return volume_audit_impl(mono, trace_determinant_route(sys, mono.base), tol, false);
}

AuditReport volume_audit(const SubstituteSystem& substitute, const State& ic, double t_end,
                         double tol, const IntegratorConfig& cfg, const BranchSelect& branches) {
    IntegratorConfig run = cfg;
    run.t_end = t_end;
    const MonodromyTrajectory mono = integrate_with_monodromy(substitute, ic, run, branches);
    return volume_audit_impl(mono, trace_determinant_route(substitute, mono.base, branches), tol,
                             true);
}

AuditReport gradient_audit(const SubstituteSystem& substitute, int sample_count, unsigned seed,
                           double tol) {
    AuditReport report;
    report.name = "gradient";
    const int n = substitute.dim();

    // Sample q inside branch-0 domains with a 2% interior margin so the
    // finite-difference probes stay in-domain too.
    Vec lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
        const WorkPotential& w = substitute.potential(i);
        if (w.identically_zero()) {
            lo[i] = -1.0;
            hi[i] = 1.0;
        } else {
            const auto& curve = w.force_branch(0).curve;
            const double margin = 0.02 * (curve.q_hi - curve.q_lo);
            lo[i] = curve.q_lo + margin;
            hi[i] = curve.q_hi - margin;
        }
    }

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst = 0.0;
    int evaluated = 0;
    for (int s = 0; s < sample_count; ++s) {
        Vec q(n), p(n);
        for (int i = 0; i < n; ++i) {
            q[i] = lo[i] + (hi[i] - lo[i]) * uni(rng);
            p[i] = -2.0 + 4.0 * uni(rng);
        }
        Vec gq, gp;
        Vec fq(n), fp(n);
        try {
            gq = substitute.grad_q(q);
            gp = substitute.grad_p(p);
            for (int i = 0; i < n; ++i) {
                const double hq = 1e-5 * std::max(1.0, std::abs(q[i]));
                Vec qp = q, qm = q;
                qp[i] += hq;
                qm[i] -= hq;
                fq[i] = (substitute.hamiltonian(qp, p) - substitute.hamiltonian(qm, p)) /
                        (2.0 * hq);
                const double hp = 1e-5 * std::max(1.0, std::abs(p[i]));
                Vec pp = p, pm = p;
                pp[i] += hp;
                pm[i] -= hp;
                fp[i] = (substitute.hamiltonian(q, pp) - substitute.hamiltonian(q, pm)) /
                        (2.0 * hp);
            }
        } catch (const DomainExit&) {
            continue;
        }
        ++evaluated;
        const double scale_q = std::max(1.0, gq.lpNorm<Eigen::Infinity>());
        const double scale_p = std::max(1.0, gp.lpNorm<Eigen::Infinity>());
        worst = std::max(worst, (gq - fq).lpNorm<Eigen::Infinity>() / scale_q);
        worst = std::max(worst, (gp - fp).lpNorm<Eigen::Infinity>() / scale_p);
    }
    if (evaluated == 0)
        throw std::runtime_error("gradient_audit: all samples fell outside the domain");

    report.metrics.push_back({"grad_fd_rel_error", worst, tol, true});
    report.metrics.push_back({"samples_evaluated", static_cast<double>(evaluated), 0.0, false});
    report.finalize();
    return report;
}

} // namespace consub
