#include <doctest.h>

#include <cmath>

#include "consub/analytic.hpp"
#include "consub/verification.hpp"

using namespace consub;

namespace {

State phase_state(double t, std::initializer_list<double> q, std::initializer_list<double> p) {
    State s;
    s.t = t;
    s.q = Vec(q.size());
    s.p = Vec(p.size());
    Index k = 0;
    for (double v : q) s.q[k++] = v;
    k = 0;
    for (double v : p) s.p[k++] = v;
    return s;
}

struct Workbench {
    SystemDefinition sys;
    Trajectory traj;
    SubstituteSystem substitute;
    State ic;
};

Workbench make_drag_bench(double t_end = 5.0) {
    Workbench w;
    w.sys = analytic::analytic_1d_drag(1.0, 0.0, 1.0).system;
    w.ic = phase_state(0.0, {0.0}, {1.0});
    IntegratorConfig cfg;
    cfg.t_end = t_end;
    cfg.abs_tol = 1e-12;
    cfg.rel_tol = 1e-10;
    w.traj = integrate(w.sys, w.ic, cfg);
    const auto segments = segment_monotone(w.traj, 0);
    w.substitute = build_substitute(
        w.sys, {integrate_work_potential(reconstruct_force(w.traj, w.sys, 0, segments), 0.0)});
    return w;
}

Workbench make_coupled_bench(double t_end = 5.0) {
    Workbench w;
    w.sys = analytic::analytic_2d(0.0, 0.0, 1.0, -1.0).system;
    w.ic = phase_state(0.0, {0.0, 0.0}, {1.0, -1.0});
    IntegratorConfig cfg;
    cfg.t_end = t_end;
    cfg.abs_tol = 1e-12;
    cfg.rel_tol = 1e-10;
    w.traj = integrate(w.sys, w.ic, cfg);
    std::vector<WorkPotential> pots;
    for (int i = 0; i < 2; ++i) {
        const auto segs = segment_monotone(w.traj, i);
        pots.push_back(
            integrate_work_potential(reconstruct_force(w.traj, w.sys, i, segs), 0.0));
    }
    w.substitute = build_substitute(w.sys, std::move(pots));
    return w;
}

IntegratorConfig verlet_cfg(double step, double t_end) {
    IntegratorConfig cfg;
    cfg.method = Method::StormerVerlet;
    cfg.step = step;
    cfg.t_end = t_end;
    cfg.samples = 501;
    return cfg;
}

} // namespace

TEST_CASE("coincidence audit: drag and coupled substitutes share the curve") {
    {
        const Workbench w = make_drag_bench();
        const Trajectory subst =
            integrate_hamiltonian(w.substitute, w.ic, verlet_cfg(2e-5, 5.0));
        const AuditReport r = check_coincidence(w.traj, subst, 1e-6);
        CHECK(r.pass);
        CHECK(r.metrics.front().value <= 1e-6);
    }
    {
        const Workbench w = make_coupled_bench();
        const Trajectory subst =
            integrate_hamiltonian(w.substitute, w.ic, verlet_cfg(2e-6, 5.0));
        const AuditReport r = check_coincidence(w.traj, subst, 1e-6);
        CHECK(r.pass);
    }
}

TEST_CASE("coincidence of a trajectory with itself is exactly zero") {
    const Workbench w = make_drag_bench(2.0);
    const AuditReport r = check_coincidence(w.traj, w.traj, 1e-12);
    CHECK(r.pass);
    CHECK(r.metrics.front().value == 0.0);
}

TEST_CASE("coincidence rejects disjoint windows") {
    const Workbench w = make_drag_bench(2.0);
    Trajectory shifted = w.traj;
    // Rebuild a trajectory starting at t=3 from the same system.
    IntegratorConfig cfg;
    cfg.t_end = 5.0;
    State late = w.traj.dense->state_at(2.0);
    late.t = 3.0;
    shifted = integrate(w.sys, late, cfg);
    CHECK_THROWS_AS(check_coincidence(w.traj, shifted, 1e-6), std::invalid_argument);
}

TEST_CASE("uniqueness probe: perturbed pairs diverge, unperturbed pair coincides") {
    const Workbench w = make_drag_bench();
    IntegratorConfig diss;
    diss.t_end = 5.0;
    const AuditReport r =
        uniqueness_probe(w.sys, w.substitute, w.ic, default_perturbations(w.ic, 1e-2), 1e-3,
                         diss, verlet_cfg(2e-5, 5.0), 1e-6);
    CHECK(r.pass);
    for (const Metric& m : r.metrics) {
        if (m.name == "unperturbed_sup_norm") CHECK(m.value <= 1e-6);
        if (m.name == "min_divergence") CHECK(m.value >= 1e-3);
    }
}

TEST_CASE("uniqueness probe on the coupled pair with single-coordinate kicks") {
    const Workbench w = make_coupled_bench();
    IntegratorConfig diss;
    diss.t_end = 5.0;
    std::vector<Vec> deltas;
    for (int i = 0; i < 4; ++i) {
        Vec d = Vec::Zero(4);
        d[i] = 1e-2;
        deltas.push_back(d);
    }
    const AuditReport r = uniqueness_probe(w.sys, w.substitute, w.ic, deltas, 1e-3, diss,
                                           verlet_cfg(2e-6, 5.0), 1e-6);
    CHECK(r.pass);
}

TEST_CASE("uniqueness probe rejects zero perturbations") {
    const Workbench w = make_drag_bench(1.0);
    IntegratorConfig diss;
    diss.t_end = 1.0;
    CHECK_THROWS_AS(uniqueness_probe(w.sys, w.substitute, w.ic, {Vec::Zero(2)}, 1e-3, diss,
                                     verlet_cfg(1e-4, 1.0), 1e-6),
                    std::invalid_argument);
}

TEST_CASE("hamiltonian constancy: drag holds 0.5, coupled holds 1.0") {
    {
        const Workbench w = make_drag_bench();
        const AuditReport r = hamiltonian_constancy(w.substitute, w.traj, 1e-6);
        CHECK(r.pass);
        for (const Metric& m : r.metrics)
            if (m.name == "hhat_value") CHECK(m.value == doctest::Approx(0.5).epsilon(1e-9));
    }
    {
        const Workbench w = make_coupled_bench();
        const AuditReport r = hamiltonian_constancy(w.substitute, w.traj, 1e-6);
        CHECK(r.pass);
        for (const Metric& m : r.metrics)
            if (m.name == "hhat_value") CHECK(m.value == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("hamiltonian constancy reduces to H conservation without damping") {
    const SystemDefinition harmonic = SystemDefinition::conservative(Mat::Constant(1, 1, 1.0));
    IntegratorConfig cfg;
    cfg.t_end = 10.0;
    const Trajectory traj = integrate(harmonic, phase_state(0.0, {1.0}, {0.0}), cfg);
    const auto segments = segment_monotone(traj, 0);
    const SubstituteSystem sub = build_substitute(
        harmonic, {integrate_work_potential(reconstruct_force(traj, harmonic, 0, segments), 1.0)});
    const AuditReport r = hamiltonian_constancy(sub, traj, 1e-6);
    CHECK(r.pass);
}

TEST_CASE("constancy deviation tightens with the integration tolerance") {
    // A substitute rebuilt from each trajectory is constant along it by
    // construction, and the drag family additionally carries the linear
    // invariant x + p that Runge-Kutta preserves exactly. The achievable
    // deviation is therefore measured against a fixed reference substitute
    // on the oscillator, where it is limited by the integration error.
    const auto osc = analytic::analytic_damped_oscillator(0.1, 1.0, 1.0, 0.0);
    const State ic = phase_state(0.0, {1.0}, {0.0});

    IntegratorConfig ref_cfg;
    ref_cfg.t_end = 3.0;
    ref_cfg.abs_tol = 1e-14;
    ref_cfg.rel_tol = 1e-13;
    ref_cfg.samples = 4001;
    const Trajectory ref = integrate(osc.system, ic, ref_cfg);
    const auto segments = segment_monotone(ref, 0, 0.0, 8193);
    const SubstituteSystem sub = build_substitute(
        osc.system,
        {integrate_work_potential(reconstruct_force(ref, osc.system, 0, segments), 1.0)});

    auto deviation_at = [&](double rel_tol) {
        IntegratorConfig cfg;
        cfg.t_end = 3.0;
        cfg.rel_tol = rel_tol;
        cfg.abs_tol = rel_tol * 1e-2;
        cfg.samples = 501;
        cfg.max_step = 3.0;  // let the tolerance, not the step cap, rule
        const Trajectory traj = integrate(osc.system, ic, cfg);
        return hamiltonian_constancy(sub, traj, 1.0).metrics.front().value;
    };
    const double loose = deviation_at(1e-4);
    const double tight = deviation_at(1e-6);
    CHECK(loose / tight >= 10.0);  // 100x tolerance gain buys at least 10x
}

TEST_CASE("volume audit: dissipative contraction and substitute preservation") {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-11;
    cfg.abs_tol = 1e-13;
    cfg.samples = 101;
    {
        const Workbench w = make_coupled_bench();
        const AuditReport r = volume_audit(w.sys, w.ic, 1.0, 1e-6, cfg);
        CHECK(r.pass);
        for (const Metric& m : r.metrics)
            if (m.name == "det_final")
                CHECK(m.value == doctest::Approx(std::exp(-2.0)).epsilon(1e-6));
    }
    {
        const Workbench w = make_coupled_bench();
        const AuditReport r = volume_audit(w.substitute, w.ic, 10.0, 1e-6, cfg);
        CHECK(r.pass);
    }
    {
        const Workbench w = make_drag_bench(2.5);
        const AuditReport r = volume_audit(w.sys, w.ic, 2.0, 1e-6, cfg);
        CHECK(r.pass);
        for (const Metric& m : r.metrics)
            if (m.name == "det_final")
                CHECK(m.value == doctest::Approx(std::exp(-2.0)).epsilon(1e-6));
    }
}

TEST_CASE("gradient audit: three example families pass at 1e-5") {
    {
        const Workbench w = make_drag_bench();
        CHECK(gradient_audit(w.substitute, 100, 42).pass);
    }
    {
        const Workbench w = make_coupled_bench();
        CHECK(gradient_audit(w.substitute, 100, 42).pass);
    }
    {
        const auto osc = analytic::analytic_damped_oscillator(0.1, 1.0, 1.0, 0.0);
        IntegratorConfig cfg;
        cfg.t_end = 4.0 * M_PI;
        cfg.abs_tol = 1e-13;
        cfg.rel_tol = 1e-12;
        const Trajectory traj = integrate(osc.system, phase_state(0.0, {1.0}, {0.0}), cfg);
        const auto segments = segment_monotone(traj, 0);
        const SubstituteSystem sub = build_substitute(
            osc.system,
            {integrate_work_potential(reconstruct_force(traj, osc.system, 0, segments), 1.0)});
        CHECK(gradient_audit(sub, 100, 42).pass);
    }
}

TEST_CASE("audits are deterministic: identical inputs give identical reports") {
    const Workbench w = make_drag_bench(2.0);
    const AuditReport a = gradient_audit(w.substitute, 50, 7);
    const AuditReport b = gradient_audit(w.substitute, 50, 7);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t k = 0; k < a.metrics.size(); ++k) {
        CHECK(a.metrics[k].name == b.metrics[k].name);
        CHECK(std::memcmp(&a.metrics[k].value, &b.metrics[k].value, sizeof(double)) == 0);
    }
}
