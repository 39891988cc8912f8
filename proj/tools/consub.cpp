// consub: construct and audit conservative substitutes of dissipative
// mechanical systems from a single phase curve.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "consub/pipeline.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    bool strict = false;
};

int run(const CliOptions& opt, consub::Verb verb) {
    using namespace consub;

    RunConfig cfg = parse_config_file(opt.config_path, opt.strict);

    std::string out = opt.out_dir;
    if (out.empty()) out = cfg.outputs.directory;
    if (out.empty()) {
        if (const char* env = std::getenv("CONSUB_OUT")) out = env;
    }
    if (out.empty()) out = "out";

    const PipelineResult result = run_pipeline(cfg, verb, out);
    for (const AuditReport& r : result.reports)
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << "\n";
    for (const std::string& f : result.files_written) std::cout << "wrote " << f << "\n";
    if (!result.reports.empty())
        std::cout << (result.exit_code == ExitCode::Ok ? "overall: PASS" : "overall: FAIL")
                  << "\n";
    return static_cast<int>(result.exit_code);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"substitute-conservative-system construction and verification"};
    app.require_subcommand(1);

    CliOptions opt;
    const std::pair<const char*, consub::Verb> verbs[] = {
        {"simulate", consub::Verb::Simulate},   {"reconstruct", consub::Verb::Reconstruct},
        {"verify", consub::Verb::Verify},       {"volume-audit", consub::Verb::VolumeAudit},
        {"all", consub::Verb::All},
    };

    consub::Verb selected = consub::Verb::All;
    for (const auto& [name, verb] : verbs) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "run configuration (JSON)")->required();
        sub->add_option("--out", opt.out_dir,
                        "output directory (default: config, then $CONSUB_OUT)");
        sub->add_flag("--strict", opt.strict, "require every config section to be present");
        sub->callback([&selected, verb] { selected = verb; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        return run(opt, selected);
    } catch (const consub::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return static_cast<int>(consub::ExitCode::BadConfig);
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return static_cast<int>(consub::ExitCode::NumericalFailure);
    }
}
