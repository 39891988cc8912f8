// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Every tolerance is pinned here, in code.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "consub/analytic.hpp"
#include "consub/pipeline.hpp"
#include "consub/verification.hpp"

using namespace consub;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    if (!pass) ++g_failures;
}

std::string metric_detail(const char* name, double value, double tol) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s = %.3e, tol %.1e", name, value, tol);
    return buf;
}

State phase_state(std::initializer_list<double> q, std::initializer_list<double> p) {
    State s;
    s.t = 0.0;
    s.q = Vec(q.size());
    s.p = Vec(p.size());
    Index k = 0;
    for (double v : q) s.q[k++] = v;
    k = 0;
    for (double v : p) s.p[k++] = v;
    return s;
}

IntegratorConfig rk45(double t_end, double rel = 1e-10, double abs = 1e-12, int samples = 2001) {
    IntegratorConfig cfg;
    cfg.method = Method::Rk45Adaptive;
    cfg.t_end = t_end;
    cfg.rel_tol = rel;
    cfg.abs_tol = abs;
    cfg.samples = samples;
    return cfg;
}

IntegratorConfig verlet(double t_end, double step, int samples = 2001) {
    IntegratorConfig cfg;
    cfg.method = Method::StormerVerlet;
    cfg.step = step;
    cfg.t_end = t_end;
    cfg.samples = samples;
    return cfg;
}

struct Bench {
    SystemDefinition sys;
    State ic;
    Trajectory traj;
    std::vector<ReconstructedForce> forces;
    SubstituteSystem substitute;
};

Bench build_bench(const SystemDefinition& sys, const State& ic, const IntegratorConfig& cfg) {
    Bench b;
    b.sys = sys;
    b.ic = ic;
    b.traj = integrate(sys, ic, cfg);
    std::vector<WorkPotential> pots;
    for (int i = 0; i < sys.dim(); ++i) {
        const auto segments = segment_monotone(b.traj, i);
        b.forces.push_back(reconstruct_force(b.traj, sys, i, segments));
        pots.push_back(integrate_work_potential(b.forces.back(), ic.q[i]));
    }
    b.substitute = build_substitute(sys, std::move(pots));
    return b;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// --- criteria -------------------------------------------------------------

void criterion_1() {
    // Reconstructed force of the drag system vs. the closed form x - 1 over
    // the visited range [0, 1 - e^-5], rk45 tol 1e-10.
    const auto drag = analytic::analytic_1d_drag(1.0, 0.0, 1.0);
    const Bench b = build_bench(drag.system, phase_state({0.0}, {1.0}), rk45(5.0));
    double worst = 0.0;
    const double x_hi = 1.0 - std::exp(-5.0);
    for (int k = 0; k <= 2000; ++k) {
        const double x = x_hi * static_cast<double>(k) / 2000.0;
        worst = std::max(worst, std::abs(b.forces[0].value(x) - (x - 1.0)));
    }
    report(1, "drag reconstruction matches x - 1 on the visited range", worst <= 1e-6,
           metric_detail("max_abs_err", worst, 1e-6));
}

void criterion_2() {
    const auto drag = analytic::analytic_1d_drag(1.0, 0.0, 1.0);
    const Bench b = build_bench(drag.system, phase_state({0.0}, {1.0}), rk45(5.0));
    const AuditReport r = hamiltonian_constancy(b.substitute, b.traj, 1e-6);
    double deviation = 0.0, value = 0.0;
    for (const Metric& m : r.metrics) {
        if (m.name == "hhat_deviation") deviation = m.value;
        if (m.name == "hhat_value") value = m.value;
    }
    const bool pass = deviation <= 1e-6 && std::abs(value - 0.5) <= 1e-6;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "deviation = %.3e, value = %.12f", deviation, value);
    report(2, "drag substitute energy is constant at c^2 A1^2 / 2 = 0.5", pass, detail);
}

Bench coupled_bench() {
    const auto pair = analytic::analytic_2d(0.0, 0.0, 1.0, -1.0);
    return build_bench(pair.system, phase_state({0.0, 0.0}, {1.0, -1.0}), rk45(5.0));
}

void criterion_3(const Bench& b, const Trajectory& subst_traj) {
    const AuditReport r = check_coincidence(b.traj, subst_traj, 1e-6);
    report(3, "coupled substitute shares the phase curve on [0, 5]", r.pass,
           metric_detail("sup_norm", r.metrics.front().value, 1e-6));
}

void criterion_4(const Bench& coupled, const Trajectory& coupled_subst) {
    // Single-coordinate +1e-2 kicks on both example families; every perturbed
    // pair must diverge by >= 1e-3 while the unperturbed pair coincides.
    bool pass = true;
    std::ostringstream detail;

    const auto drag = analytic::analytic_1d_drag(1.0, 0.0, 1.0);
    const Bench bd = build_bench(drag.system, phase_state({0.0}, {1.0}), rk45(5.0));
    {
        std::vector<Vec> deltas;
        for (int i = 0; i < 2; ++i) {
            Vec d = Vec::Zero(2);
            d[i] = 1e-2;
            deltas.push_back(d);
        }
        const AuditReport r = uniqueness_probe(bd.sys, bd.substitute, bd.ic, deltas, 1e-3,
                                               rk45(5.0), verlet(5.0, 2e-5), 1e-6);
        pass = pass && r.pass;
        for (const Metric& m : r.metrics)
            if (m.name == "min_divergence") detail << "drag min_div = " << m.value;
    }
    {
        std::vector<Vec> deltas;
        for (int i = 0; i < 4; ++i) {
            Vec d = Vec::Zero(4);
            d[i] = 1e-2;
            deltas.push_back(d);
        }
        const AuditReport r = uniqueness_probe(coupled.sys, coupled.substitute, coupled.ic,
                                               deltas, 1e-3, rk45(5.0), verlet(5.0, 2e-6), 1e-6);
        pass = pass && r.pass;
        for (const Metric& m : r.metrics)
            if (m.name == "min_divergence") detail << ", coupled min_div = " << m.value;
    }
    (void)coupled_subst;
    report(4, "perturbed pairs diverge >= 1e-3; unperturbed pair coincides", pass, detail.str());
}

void criterion_5(const Bench& coupled) {
    bool pass = true;
    std::ostringstream detail;

    // Dissipative flow: det = e^{-2t} at t in {0.5, 1, 2}.
    const MonodromyTrajectory mono = integrate_with_monodromy(
        coupled.sys, coupled.ic, rk45(2.0, 1e-11, 1e-13, 201));
    for (double t_check : {0.5, 1.0, 2.0}) {
        const std::size_t k = static_cast<std::size_t>(std::llround(t_check / 2.0 * 200));
        const double det = mono.jacobian_dets[k];
        const double ref = std::exp(-2.0 * mono.base.samples[k].t);
        const double rel = std::abs(det - ref) / ref;
        pass = pass && rel <= 1e-6;
        detail << "rel_err(t=" << t_check << ") = " << rel << "  ";
    }

    // Substitute flow: det = 1 up to t = 10.
    const MonodromyTrajectory sub_mono = integrate_with_monodromy(
        coupled.substitute, coupled.ic, rk45(10.0, 1e-11, 1e-13, 501));
    double worst_unit = 0.0;
    for (double det : sub_mono.jacobian_dets)
        worst_unit = std::max(worst_unit, std::abs(det - 1.0));
    pass = pass && worst_unit <= 1e-6;
    detail << "|det-1|max(t<=10) = " << worst_unit;

    report(5, "Liouville contrast: det = e^{-2t} vs det = 1", pass, detail.str());
}

void criterion_6() {
    const auto osc = analytic::analytic_damped_oscillator(0.1, 1.0, 1.0, 0.0);
    IntegratorConfig cfg = rk45(4.0 * M_PI, 1e-12, 1e-13, 4001);
    const Trajectory traj = integrate(osc.system, phase_state({1.0}, {0.0}), cfg);
    const auto segments = segment_monotone(traj, 0);
    const ReconstructedForce force = reconstruct_force(traj, osc.system, 0, segments);
    const bool pass = segments.size() == 4 && force.max_residual() <= 1e-6;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "branches = %zu, max residual = %.3e", segments.size(),
                  force.max_residual());
    report(6, "underdamped oscillator: 4 branches, restriction residual <= 1e-6", pass, detail);
}

void criterion_7(const Bench& coupled) {
    bool pass = true;
    std::ostringstream detail;

    const auto drag = analytic::analytic_1d_drag(1.0, 0.0, 1.0);
    const Bench bd = build_bench(drag.system, phase_state({0.0}, {1.0}), rk45(5.0));
    const AuditReport r1 = gradient_audit(bd.substitute, 100, 2024, 1e-5);
    pass = pass && r1.pass;
    detail << "drag = " << r1.metrics.front().value;

    const AuditReport r2 = gradient_audit(coupled.substitute, 100, 2024, 1e-5);
    pass = pass && r2.pass;
    detail << ", coupled = " << r2.metrics.front().value;

    const auto osc = analytic::analytic_damped_oscillator(0.1, 1.0, 1.0, 0.0);
    const Bench bo =
        build_bench(osc.system, phase_state({1.0}, {0.0}), rk45(4.0 * M_PI, 1e-12, 1e-13, 4001));
    const AuditReport r3 = gradient_audit(bo.substitute, 100, 2024, 1e-5);
    pass = pass && r3.pass;
    detail << ", oscillator = " << r3.metrics.front().value;

    report(7, "gradient audit at 100 random states, three families", pass, detail.str());
}

void criterion_8() {
    // Zero damping: W == 0 and Hhat == H to 1e-12, pipeline exits 0.
    const std::string config = R"json({
      "system": {"family": "linear-ndim", "damping": [[0.0]], "stiffness": [[1.0]]},
      "ic": [1.0, 0.0],
      "integrator": {"t_end": 10.0, "samples": 2001},
      "substitute_integrator": {"method": "stormer-verlet", "step": 1e-4, "samples": 501},
      "seed": 11
    })json";
    const RunConfig cfg = parse_config_text(config);
    const fs::path dir = fs::temp_directory_path() / "consub_acceptance" / "identity";
    fs::remove_all(dir);
    const PipelineResult result = run_pipeline(cfg, Verb::Verify, dir.string());

    double worst_h = 1.0, worst_w = 1.0;
    for (const AuditReport& r : result.reports) {
        if (r.name != "identity") continue;
        for (const Metric& m : r.metrics) {
            if (m.name == "hhat_vs_h") worst_h = m.value;
            if (m.name == "work_potential_max") worst_w = m.value;
        }
    }
    const bool pass =
        result.exit_code == ExitCode::Ok && worst_h <= 1e-12 && worst_w <= 1e-12;
    char detail[160];
    std::snprintf(detail, sizeof(detail), "exit = %d, |Hhat-H| = %.3e, |W| = %.3e",
                  static_cast<int>(result.exit_code), worst_h, worst_w);
    report(8, "zero damping: W == 0, Hhat == H to 1e-12, pipeline exits 0", pass, detail);
}

void criterion_9(const Bench& coupled) {
    // Equivalent-stiffness route vs. direct reconstruction: Hhat agreement at
    // 100 states on the shared curve.
    const EquivalentStiffness eq = equivalent_stiffness(coupled.traj, coupled.sys);
    const SubstituteSystem sub_rho = build_substitute(coupled.sys, eq.work_potentials());

    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double t = 5.0 * static_cast<double>(k) / 99.0;
        const State s = coupled.traj.dense->state_at(t);
        worst = std::max(worst, std::abs(coupled.substitute.hamiltonian(s.q, s.p) -
                                         sub_rho.hamiltonian(s.q, s.p)));
    }
    report(9, "equivalent-stiffness and direct routes agree on Hhat", worst <= 1e-6,
           metric_detail("max_abs_diff", worst, 1e-6));
}

void criterion_10() {
    const std::string config = R"json({
      "system": {"family": "drag-1d", "c": 1.0},
      "ic": [0.0, 1.0],
      "integrator": {"t_end": 5.0, "samples": 1001},
      "substitute_integrator": {"method": "stormer-verlet", "step": 2e-5, "samples": 1001},
      "seed": 99
    })json";
    const RunConfig cfg = parse_config_text(config);
    const fs::path base = fs::temp_directory_path() / "consub_acceptance";
    const fs::path dir_a = base / "determinism_a";
    const fs::path dir_b = base / "determinism_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    run_pipeline(cfg, Verb::All, dir_a.string());
    run_pipeline(cfg, Verb::All, dir_b.string());

    bool pass = true;
    int files = 0;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        const fs::path other = dir_b / entry.path().filename();
        ++files;
        if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) {
            pass = false;
            break;
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%d files byte-compared", files);
    report(10, "identical config and seed reproduce byte-identical artifacts", pass && files > 0,
           detail);
}

} // namespace

int main() {
    std::setvbuf(stdout, nullptr, _IONBF, 0);

    criterion_1();
    criterion_2();

    const Bench coupled = coupled_bench();
    const Trajectory coupled_subst =
        integrate_hamiltonian(coupled.substitute, coupled.ic, verlet(5.0, 2e-6));
    criterion_3(coupled, coupled_subst);
    criterion_4(coupled, coupled_subst);
    criterion_5(coupled);
    criterion_6();
    criterion_7(coupled);
    criterion_8();
    criterion_9(coupled);
    criterion_10();

    if (g_failures == 0) {
        std::printf("acceptance: all criteria PASS\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
    return 1;
}
