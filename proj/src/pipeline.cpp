#include "consub/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "consub/analytic.hpp"

namespace consub {

namespace fs = std::filesystem;

Verb verb_from_string(const std::string& name) {
    if (name == "simulate") return Verb::Simulate;
    if (name == "reconstruct") return Verb::Reconstruct;
    if (name == "verify") return Verb::Verify;
    if (name == "volume-audit") return Verb::VolumeAudit;
    if (name == "all") return Verb::All;
    throw ConfigError("unknown verb: " + name);
}

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& header) : path_(path.string()) {
        out_.open(path);
        if (!out_) throw std::runtime_error("cannot open output file: " + path_);
        out_ << header << "\n";
    }

    void row(const std::vector<double>& values) {
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (k) out_ << ",";
            out_ << fmt17(values[k]);
        }
        out_ << "\n";
    }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("write failure: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

std::string trajectory_header(int n) {
    std::string h = "t [time]";
    for (int i = 1; i <= n; ++i) h += ",q" + std::to_string(i) + " [length]";
    for (int i = 1; i <= n; ++i) h += ",p" + std::to_string(i) + " [momentum]";
    return h;
}

void write_trajectory_csv(const fs::path& path, const Trajectory& traj) {
    const int n = traj.dof();
    CsvWriter csv(path, trajectory_header(n));
    std::vector<double> row(1 + 2 * n);
    for (const State& s : traj.samples) {
        row[0] = s.t;
        for (int i = 0; i < n; ++i) row[1 + i] = s.q[i];
        for (int i = 0; i < n; ++i) row[1 + n + i] = s.p[i];
        csv.row(row);
    }
    csv.close();
}

bool wants(const RunConfig& cfg, const std::string& artifact) {
    return std::find(cfg.outputs.artifacts.begin(), cfg.outputs.artifacts.end(), artifact) !=
           cfg.outputs.artifacts.end();
}

} // namespace

void emit_report(const std::vector<AuditReport>& reports, const std::string& path,
                 bool machine_readable) {
    if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
    std::vector<AuditReport> sorted = reports;
    std::sort(sorted.begin(), sorted.end(),
              [](const AuditReport& a, const AuditReport& b) { return a.name < b.name; });

    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_report: cannot open output file: " + path);

    if (machine_readable) {
        for (const AuditReport& r : sorted) {
            nlohmann::ordered_json j;
            j["name"] = r.name;
            j["pass"] = r.pass;
            j["config"] = r.config_digest;
            j["trajectories"] = r.trajectory_digests;
            if (!r.note.empty()) j["note"] = r.note;
            nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
            for (const Metric& m : r.metrics) {
                nlohmann::ordered_json mj;
                mj["name"] = m.name;
                mj["value"] = m.value;
                if (m.checked) mj["tolerance"] = m.tolerance;
                metrics.push_back(mj);
            }
            j["metrics"] = metrics;
            out << j.dump() << "\n";
        }
    } else {
        bool all_pass = true;
        for (const AuditReport& r : sorted) {
            out << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << "\n";
            for (const Metric& m : r.metrics) {
                out << "    " << m.name << " = " << fmt17(m.value);
                if (m.checked) out << "  (tol " << fmt17(m.tolerance) << ")";
                out << "\n";
            }
            if (!r.note.empty()) out << "    note: " << r.note << "\n";
            all_pass = all_pass && r.pass;
        }
        out << (all_pass ? "overall: PASS" : "overall: FAIL") << "\n";
    }
    out.close();
    if (!out) throw std::runtime_error("emit_report: write failure: " + path);
}

PipelineResult run_pipeline(const RunConfig& cfg, Verb verb, const std::string& out_dir) {
    PipelineResult result;
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + out_dir);

    const SystemDefinition sys = cfg.build_system();
    const State ic = cfg.initial_state(sys);
    const int n = sys.dim();
    const std::string config_digest = cfg.digest();

    auto written = [&](const fs::path& p) { result.files_written.push_back(p.string()); };

    // 1. Dissipative trajectory.
    const Trajectory traj = integrate(sys, ic, cfg.integrator);
    if ((wants(cfg, "trajectory"))) {
        write_trajectory_csv(dir / "trajectory.csv", traj);
        written(dir / "trajectory.csv");
    }
    if (verb == Verb::Simulate) return result;

    std::vector<AuditReport> reports;
    auto add_report = [&](AuditReport r) {
        r.config_digest = config_digest;
        reports.push_back(std::move(r));
    };

    // 2. Volume audits come first: the volume-audit verb needs nothing else.
    if (verb == Verb::VolumeAudit || verb == Verb::Verify || verb == Verb::All) {
        IntegratorConfig vol_cfg = cfg.integrator;
        vol_cfg.method = Method::Rk45Adaptive;
        add_report(volume_audit(sys, ic, cfg.integrator.t_end, cfg.tolerances.volume, vol_cfg));
        if (verb == Verb::VolumeAudit || verb == Verb::All) {
            const MonodromyTrajectory mono = integrate_with_monodromy(sys, ic, vol_cfg);
            if (wants(cfg, "plots")) {
                CsvWriter csv(dir / "det_dissipative.csv", "t [time],det [unitless]");
                for (std::size_t k = 0; k < mono.base.samples.size(); ++k)
                    csv.row({mono.base.samples[k].t, mono.jacobian_dets[k]});
                csv.close();
                written(dir / "det_dissipative.csv");
            }
        }
    }

    SubstituteSystem substitute;
    std::vector<ReconstructedForce> forces;
    bool reconstructed = false;

    if (verb != Verb::VolumeAudit) {
        // 3. Reconstruction per coordinate.
        std::vector<WorkPotential> potentials;
        for (int i = 0; i < n; ++i) {
            const auto segments = segment_monotone(traj, i, cfg.thresholds.eps_turn,
                                                   cfg.thresholds.branch_nodes);
            result.branch_count_max =
                std::max(result.branch_count_max, static_cast<int>(segments.size()));
            forces.push_back(
                reconstruct_force(traj, sys, i, segments, cfg.thresholds.pad_rel));
            potentials.push_back(integrate_work_potential(forces.back(), ic.q[i]));
        }
        substitute = build_substitute(sys, std::move(potentials));
        reconstructed = true;

        if (wants(cfg, "reconstruction")) {
            for (int i = 0; i < n; ++i) {
                const std::string name = "reconstruction_c" + std::to_string(i + 1) + ".csv";
                CsvWriter csv(dir / name,
                              "branch,q" + std::to_string(i + 1) +
                                  " [length],force [force],work [energy]");
                for (int b = 0; b < forces[i].branch_count(); ++b) {
                    const ForceBranch& fb = forces[i].branch(b);
                    for (Index k = 0; k < fb.curve.q_nodes.size(); ++k) {
                        const double q = fb.curve.q_nodes[k];
                        csv.row({static_cast<double>(b), q, fb.force_nodes[k],
                                 substitute.potential(i).value(q, b)});
                    }
                }
                csv.close();
                written(dir / name);
            }
        }
    }
    if (verb == Verb::Reconstruct) return result;

    if (verb != Verb::VolumeAudit && reconstructed) {
        // 4. Substitute trajectory over the common branch-0 window.
        double t_start = traj.t_begin();
        double t_stop = traj.t_end();
        for (int i = 0; i < n; ++i) {
            const WorkPotential& w = substitute.potential(i);
            if (w.identically_zero()) continue;
            t_start = std::max(t_start, w.force_branch(0).curve.t_lo);
            t_stop = std::min(t_stop, w.force_branch(0).curve.t_hi);
        }
        State start_state = t_start > traj.t_begin() ? traj.dense->state_at(t_start) : ic;

        IntegratorConfig sub_cfg = cfg.substitute_integrator;
        sub_cfg.t_end = t_stop;
        const Trajectory subst_traj = integrate_hamiltonian(substitute, start_state, sub_cfg);

        if (wants(cfg, "trajectory") && verb == Verb::All) {
            write_trajectory_csv(dir / "substitute_trajectory.csv", subst_traj);
            written(dir / "substitute_trajectory.csv");
        }

        // 5. Audits. The substitute volume audit runs on the interior of the
        // common window: d𝓕/dq is singular right at turning-point edges and
        // would grind the variational integrator to a halt there.
        add_report(check_coincidence(traj, subst_traj, cfg.tolerances.coincidence));
        add_report(hamiltonian_constancy(substitute, traj, cfg.tolerances.constancy));
        add_report(gradient_audit(substitute, 100, cfg.seed, cfg.tolerances.gradient));
        const double t_vol_a = t_start + 0.05 * (t_stop - t_start);
        const double t_vol_b = t_stop - 0.05 * (t_stop - t_start);
        const State vol_state = traj.dense->state_at(t_vol_a);
        add_report(volume_audit(substitute, vol_state, t_vol_b, cfg.tolerances.volume,
                                IntegratorConfig{}));

        {
            AuditReport r;
            r.name = "restriction";
            double worst = 0.0;
            for (const auto& f : forces) worst = std::max(worst, f.max_residual());
            r.metrics.push_back({"max_residual", worst, cfg.tolerances.restriction, true});
            r.metrics.push_back(
                {"branches_max", static_cast<double>(result.branch_count_max), 0.0, false});
            r.trajectory_digests = {trajectory_hash(traj)};
            r.finalize();
            add_report(std::move(r));
        }

        {
            AuditReport r;
            r.name = "energy-rate";
            const double residual = energy_rate_check(sys, traj);
            r.metrics.push_back({"work_energy_residual", residual, cfg.tolerances.energy_rate,
                                 true});
            r.trajectory_digests = {trajectory_hash(traj)};
            r.finalize();
            add_report(std::move(r));
        }

        if (sys.is_conservative()) {
            // Identity case: the substitute must reduce to the original.
            AuditReport r;
            r.name = "identity";
            double worst_h = 0.0, worst_w = 0.0;
            for (const State& s : traj.samples) {
                const BranchSelect br = substitute.branches_at_time(s.t);
                worst_h = std::max(worst_h, std::abs(substitute.hamiltonian(s.q, s.p, br) -
                                                     total_energy(sys, s)));
                for (int i = 0; i < n; ++i)
                    worst_w = std::max(worst_w,
                                       std::abs(substitute.potential(i).value(s.q[i], br[i])));
            }
            r.metrics.push_back({"hhat_vs_h", worst_h, cfg.tolerances.identity, true});
            r.metrics.push_back({"work_potential_max", worst_w, cfg.tolerances.identity, true});
            r.note = "conservative system: uniqueness probe skipped (substitute equals original)";
            r.finalize();
            add_report(std::move(r));
        } else {
            add_report(uniqueness_probe(sys, substitute, start_state,
                                        default_perturbations(start_state),
                                        cfg.tolerances.divergence, cfg.integrator, sub_cfg,
                                        cfg.tolerances.coincidence));
        }

        // 6. Plot-ready data.
        if (wants(cfg, "plots") && verb == Verb::All) {
            for (int i = 0; i < n; ++i) {
                const std::string name = "phase_c" + std::to_string(i + 1) + ".csv";
                CsvWriter csv(dir / name, "q" + std::to_string(i + 1) + " [length],p" +
                                              std::to_string(i + 1) + " [momentum]");
                for (const State& s : traj.samples) csv.row({s.q[i], s.p[i]});
                csv.close();
                written(dir / name);
            }
            {
                CsvWriter csv(dir / "hhat_t.csv", "t [time],hhat [energy]");
                for (const State& s : traj.samples) {
                    const BranchSelect br = substitute.branches_at_time(s.t);
                    try {
                        csv.row({s.t, substitute.hamiltonian(s.q, s.p, br)});
                    } catch (const DomainExit&) {
                        // sample inside a turning gap; skip the row
                    }
                }
                csv.close();
                written(dir / "hhat_t.csv");
            }
            {
                const MonodromyTrajectory mono =
                    integrate_with_monodromy(substitute, vol_state, IntegratorConfig{
                        Method::Rk45Adaptive, 0.0, 1e-12, 1e-10, t_vol_b, 50'000'000, 501, 0.0});
                CsvWriter csv(dir / "det_substitute.csv", "t [time],det [unitless]");
                for (std::size_t k = 0; k < mono.base.samples.size(); ++k)
                    csv.row({mono.base.samples[k].t, mono.jacobian_dets[k]});
                csv.close();
                written(dir / "det_substitute.csv");
            }
        }
    }

    std::sort(reports.begin(), reports.end(),
              [](const AuditReport& a, const AuditReport& b) { return a.name < b.name; });
    result.reports = reports;

    if (wants(cfg, "report")) {
        emit_report(reports, (dir / "report.txt").string(), false);
        written(dir / "report.txt");
        emit_report(reports, (dir / "report.jsonl").string(), true);
        written(dir / "report.jsonl");
    }

    bool all_pass = true;
    for (const AuditReport& r : reports) all_pass = all_pass && r.pass;
    result.exit_code = all_pass ? ExitCode::Ok : ExitCode::AuditFailure;
    return result;
}

} // namespace consub
