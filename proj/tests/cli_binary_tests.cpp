// End-to-end checks of the installed CLI: verbs, flags, the output-directory
// environment variable, and the exit-code contract (0 pass, 1 audit failure,
// 2 config error, 3 numerical failure).

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef CONSUB_CLI_PATH
#error "CONSUB_CLI_PATH must point at the consub executable"
#endif

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string cmd =
        env_prefix + " \"" + CONSUB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "consub_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "config.json";
    std::ofstream out(p);
    out << body;
    return p;
}

const char* kGoodConfig = R"json({
  "system": {"family": "drag-1d", "c": 1.0},
  "ic": [0.0, 1.0],
  "integrator": {"t_end": 3.0, "samples": 501},
  "substitute_integrator": {"method": "stormer-verlet", "step": 5e-5, "samples": 501},
  "seed": 5
})json";

} // namespace

TEST_CASE("cli: verify on a sound config exits 0 and writes the report") {
    const fs::path dir = fresh_dir("ok");
    const fs::path cfg = write_config(dir, kGoodConfig);
    const int code =
        run_cli("verify --config " + cfg.string() + " --out " + (dir / "out").string());
    CHECK(code == 0);
    CHECK(fs::exists(dir / "out" / "report.jsonl"));
}

TEST_CASE("cli: simulate writes only the trajectory") {
    const fs::path dir = fresh_dir("simulate");
    const fs::path cfg = write_config(dir, kGoodConfig);
    const int code =
        run_cli("simulate --config " + cfg.string() + " --out " + (dir / "out").string());
    CHECK(code == 0);
    CHECK(fs::exists(dir / "out" / "trajectory.csv"));
    CHECK(!fs::exists(dir / "out" / "report.jsonl"));
}

TEST_CASE("cli: audit failure exits 1 but still writes the report") {
    const fs::path dir = fresh_dir("audit_fail");
    const std::string body = R"json({
      "system": {"family": "drag-1d", "c": 1.0},
      "ic": [0.0, 1.0],
      "integrator": {"t_end": 3.0, "samples": 501},
      "substitute_integrator": {"method": "stormer-verlet", "step": 5e-5, "samples": 501},
      "tolerances": {"coincidence": 1e-16},
      "seed": 5
    })json";
    const fs::path cfg = write_config(dir, body);
    const int code =
        run_cli("verify --config " + cfg.string() + " --out " + (dir / "out").string());
    CHECK(code == 1);
    CHECK(fs::exists(dir / "out" / "report.jsonl"));
}

TEST_CASE("cli: config problems exit 2") {
    const fs::path dir = fresh_dir("bad_config");
    const fs::path cfg = write_config(dir, R"({"system": {"family": "drag-1d"},
                                              "ic": [0, 1], "mystery": true})");
    CHECK(run_cli("verify --config " + cfg.string()) == 2);

    // Constraint violation in the coupled family.
    const fs::path cfg2 = write_config(fresh_dir("bad_constraint"),
                                       R"({"system": {"family": "coupled-2d"},
                                           "ic": [0, 0, 1.0, -0.25]})");
    CHECK(run_cli("verify --config " + cfg2.string()) == 2);

    CHECK(run_cli("verify --config /nonexistent/nowhere.json") == 2);
}

TEST_CASE("cli: numerical failure exits 3") {
    const fs::path dir = fresh_dir("numerical");
    const std::string body = R"json({
      "system": {"family": "drag-1d", "c": 1.0},
      "ic": [0.0, 1.0],
      "integrator": {"method": "rk4-fixed", "step": 1e-7, "t_end": 5.0,
                     "max_steps": 1000, "samples": 101},
      "seed": 5
    })json";
    const fs::path cfg = write_config(dir, body);
    const int code =
        run_cli("simulate --config " + cfg.string() + " --out " + (dir / "out").string());
    CHECK(code == 3);
}

TEST_CASE("cli: CONSUB_OUT provides the default output directory") {
    const fs::path dir = fresh_dir("env_out");
    const fs::path cfg = write_config(dir, kGoodConfig);  // config has no directory
    const fs::path out = dir / "from_env";
    const int code = run_cli("simulate --config " + cfg.string(),
                             "CONSUB_OUT=" + out.string());
    CHECK(code == 0);
    CHECK(fs::exists(out / "trajectory.csv"));
}

TEST_CASE("cli: strict mode rejects configs with missing sections") {
    const fs::path dir = fresh_dir("strict");
    const fs::path cfg = write_config(dir, kGoodConfig);  // lacks thresholds etc.
    CHECK(run_cli("verify --strict --config " + cfg.string()) == 2);
}
