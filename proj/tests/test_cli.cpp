#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code;
    std::string output; // stdout + stderr
};

CommandResult run_cli(const std::string& args, const std::string& env = "") {
    const fs::path log = fs::temp_directory_path() / "sddelab_cli_out.txt";
    const std::string cmd = env + " " + SDDE_LAB_BIN + " " + args + " > " + log.string() +
                            " 2>&1";
    const int rc = std::system(cmd.c_str());
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(rc), ss.str()};
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p, std::ios::trunc);
    out << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("sddelab_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("check mode runs out of the box on the builtin problem") {
    fs::path dir = fresh_dir("check");
    fs::path cfg = write_config("check.json", R"json({
      "problem": "counterexample-sdde",
      "T": 20.0, "delta": [0.1],
      "check": {"box_radius": 50.0, "n_samples": 2048},
      "out": ")json" + dir.string() + R"json("
    })json");
    CommandResult r = run_cli("check --config " + cfg.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("check: pass") != std::string::npos);
    CHECK(fs::exists(dir / "check.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("validation failures exit with code 2 and a single-line reason") {
    fs::path cfg = write_config("bad.json", R"json({"delta": [2.0]})json");
    CommandResult r = run_cli("check --config " + cfg.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.rfind("error: config:", 0) == 0);
    CHECK(std::count(r.output.begin(), r.output.end(), '\n') == 1);

    CommandResult missing = run_cli("check --config /nonexistent.json");
    CHECK(missing.exit_code != 0);

    fs::path bad_expr = write_config("bad_expr.json", R"json({
      "problem": {"m": 1, "d": 1, "tau": 1.0,
                  "drift": ["sin(x1"], "diffusion": [["x1"]], "initial": ["1"]}
    })json");
    CommandResult expr_err = run_cli("simulate --config " + bad_expr.string());
    CHECK(expr_err.exit_code == 2);
    CHECK(expr_err.output.find("offset") != std::string::npos);
}

TEST_CASE("simulate emits trajectory and first-step files") {
    fs::path dir = fresh_dir("sim");
    fs::path cfg = write_config("sim.json", R"json({
      "problem": "dissipative-sde",
      "T": 2.0, "delta": [0.1], "paths": 3, "master_seed": 11,
      "svg": true,
      "out": ")json" + dir.string() + R"json("
    })json");
    CommandResult r = run_cli("simulate --config " + cfg.string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "path_0000.csv"));
    CHECK(fs::exists(dir / "path_0002.csv"));
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "first_steps.csv"));
    CHECK(fs::exists(dir / "paths_log10_abs.svg"));
    const std::string head = slurp(dir / "path_0000.csv");
    CHECK(head.rfind("# config_hash=", 0) == 0);
    CHECK(head.find("step,t,h,x_1") != std::string::npos);
}

TEST_CASE("simulate with zero coefficients emits a constant-path CSV") {
    fs::path dir = fresh_dir("const");
    fs::path cfg = write_config("const.json", R"json({
      "problem": {"m": 1, "d": 1, "tau": 1.0,
                  "drift": ["0"], "diffusion": [["0"]], "initial": ["2.5"]},
      "T": 1.0, "delta": [0.25], "paths": 1, "master_seed": 4,
      "out": ")json" + dir.string() + R"json("
    })json");
    CommandResult r = run_cli("simulate --config " + cfg.string());
    CHECK(r.exit_code == 0);
    std::istringstream rows(slurp(dir / "path_0000.csv"));
    std::string line;
    std::getline(rows, line); // hash
    std::getline(rows, line); // header
    int data_rows = 0;
    while (std::getline(rows, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "2.5");
        ++data_rows;
    }
    CHECK(data_rows == 5); // nodes 0, 0.25, ..., 1.0
}

TEST_CASE("explode mode: blow-up mix at the table-scale step, trajectories dumped") {
    fs::path dir = fresh_dir("explode");
    fs::path cfg = write_config("explode.json", R"json({
      "problem": "counterexample-sdde",
      "fixed_dt": 2e-4, "k_steps": 400, "paths": 120, "master_seed": 2,
      "dump_paths": 6,
      "out": ")json" + dir.string() + R"json("
    })json");
    CommandResult r = run_cli("explode --config " + cfg.string());
    CHECK(r.exit_code == 0);
    for (int i = 0; i < 6; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "path_%04d.csv", i);
        CHECK(fs::exists(dir / name));
    }
    // at dt = 2e-4 both outcomes appear: a fraction strictly inside (0,1)
    const std::string stats = slurp(dir / "explosion.csv");
    std::istringstream lines(stats);
    std::string comment, header, row;
    std::getline(lines, comment);
    std::getline(lines, header);
    std::getline(lines, row);
    const auto first_comma = row.find(',');
    const auto second_comma = row.find(',', first_comma + 1);
    const int exploded = std::stoi(row.substr(first_comma + 1, second_comma - first_comma - 1));
    CHECK(exploded > 0);
    CHECK(exploded < 120);
    CHECK(r.output.find("audit_violations=0") != std::string::npos);
}

TEST_CASE("seed and paths flags override the config") {
    fs::path d1 = fresh_dir("ovr1"), d2 = fresh_dir("ovr2");
    fs::path cfg = write_config("ovr.json", R"json({
      "problem": "dissipative-sde", "T": 1.0, "delta": [0.1],
      "paths": 2, "master_seed": 1, "out": "unused"
    })json");
    CommandResult r1 = run_cli("stability --config " + cfg.string() + " --out " + d1.string() +
                               " --seed 77 --paths 4");
    CHECK(r1.exit_code == 0);
    const std::string lyap = slurp(d1 / "lyapunov.csv");
    CHECK(std::count(lyap.begin(), lyap.end(), '\n') == 2 + 4); // hash + header + 4 rows

    // same overrides replay byte-identically with a different worker count
    CommandResult r2 = run_cli("stability --config " + cfg.string() + " --out " + d2.string() +
                                   " --seed 77 --paths 4",
                               "SDDE_LAB_THREADS=3");
    CHECK(r2.exit_code == 0);
    CHECK(slurp(d2 / "lyapunov.csv") == lyap);
}

TEST_CASE("converge mode reports the fitted order") {
    fs::path dir = fresh_dir("conv");
    fs::path cfg = write_config("conv.json", R"json({
      "problem": "linear-sdde", "T": 2.0,
      "delta": [0.125, 0.0625, 0.03125], "paths": 16,
      "master_seed": 3, "delta_ref": 0.00048828125,
      "out": ")json" + dir.string() + R"json("
    })json");
    CommandResult r = run_cli("converge --config " + cfg.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("converge: slope=") != std::string::npos);
    CHECK(fs::exists(dir / "errors.csv"));
    CHECK(fs::exists(dir / "fit.csv"));
    CHECK(fs::exists(dir / "validation.csv"));
}
