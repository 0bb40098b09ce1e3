#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return EIGENDRIFT_CLI_PATH; }

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "eigendrift_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    fs::path p = dir / "config.json";
    std::ofstream(p) << body;
    return p;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(cli_path()) + " " + args +
                      " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kEigenConfig = R"({
  "schema": 1,
  "problem": {"dim": 1, "a": ["0.5"], "b": ["1.5*x1"], "f": "x1^2"},
  "task": {"type": "eigen"},
  "numerics": {"ladder": {"r0": 2.0, "growth": 1.5, "max_rungs": 4,
                          "n_per_unit": 30}}
})";

}  // namespace

TEST_CASE("eigen task writes a report, CSVs and a plot") {
    fs::path dir = fresh_dir("eigen");
    fs::path cfg = write_config(dir, kEigenConfig);
    int rc = run_cli("eigen --config " + cfg.string() + " --out " +
                     (dir / "out").string());
    CHECK(rc == 0);

    json report = json::parse(slurp(dir / "out" / "report.json"));
    CHECK(report["command"] == "eigen");
    CHECK(report["schema"] == 1);
    double lam = report["results"]["lambda_star"].get<double>();
    CHECK(lam == doctest::Approx(-1.0).epsilon(3e-2));

    std::string ladder = slurp(dir / "out" / "ladder.csv");
    CHECK(ladder.rfind("r,n_per_axis,lambda\n", 0) == 0);
    CHECK(ladder.find("\r") == std::string::npos);  // LF only
    CHECK(fs::exists(dir / "out" / "psi.csv"));
    std::string svg = slurp(dir / "out" / "eigen.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("viewBox=\"0 0 800 600\"") != std::string::npos);
}

TEST_CASE("config syntax errors exit with code 2") {
    fs::path dir = fresh_dir("bad_expr");
    fs::path cfg = write_config(dir, R"({
      "schema": 1,
      "problem": {"dim": 1, "a": ["0.5"], "b": ["-x1"], "f": "x1^^2"},
      "task": {"type": "eigen"}
    })");
    CHECK(run_cli("eigen --config " + cfg.string() + " --out " +
                  (dir / "out").string()) == 2);

    fs::path missing = write_config(fresh_dir("missing_key"), R"({
      "schema": 1,
      "problem": {"dim": 1, "a": ["0.5"]},
      "task": {"type": "eigen"}
    })");
    CHECK(run_cli("eigen --config " + missing.string()) == 2);
}

TEST_CASE("subcommand must match the configured task type") {
    fs::path dir = fresh_dir("mismatch");
    fs::path cfg = write_config(dir, kEigenConfig);
    CHECK(run_cli("curve --config " + cfg.string() + " --out " +
                  (dir / "out").string()) == 2);
}

TEST_CASE("runtime failures exit with code 3 and a partial report") {
    fs::path dir = fresh_dir("diverged");
    // unconfined quadratic potential: the exhaustion ladder diverges
    fs::path cfg = write_config(dir, R"({
      "schema": 1,
      "problem": {"dim": 1, "a": ["0.5"], "b": ["0"], "f": "x1^2"},
      "task": {"type": "eigen"},
      "numerics": {"ladder": {"max_rungs": 6, "n_per_unit": 20}}
    })");
    CHECK(run_cli("eigen --config " + cfg.string() + " --out " +
                  (dir / "out").string()) == 3);
    json report = json::parse(slurp(dir / "out" / "report.json"));
    CHECK(report.contains("error"));
}

TEST_CASE("seeded simulations are byte-identical across runs") {
    std::string body = R"json({
      "schema": 1,
      "problem": {"dim": 1, "a": ["0.5"], "b": ["-x1"], "f": "exp(-x1^2)"},
      "task": {"type": "simulate", "drift": "base", "x0": [1.0]},
      "numerics": {"seed": 7,
                   "sim": {"dt": 0.01, "horizon": 1.0, "n_paths": 50,
                           "record_stride": 10}}
    })json";
    fs::path d1 = fresh_dir("sim1"), d2 = fresh_dir("sim2");
    fs::path c1 = write_config(d1, body), c2 = write_config(d2, body);
    REQUIRE(run_cli("simulate --config " + c1.string() + " --out " +
                    (d1 / "out").string()) == 0);
    REQUIRE(run_cli("simulate --config " + c2.string() + " --out " +
                    (d2 / "out").string()) == 0);
    std::string e1 = slurp(d1 / "out" / "ensemble.csv");
    std::string e2 = slurp(d2 / "out" / "ensemble.csv");
    REQUIRE(!e1.empty());
    CHECK(e1 == e2);

    // a different seed produces different samples
    fs::path d3 = fresh_dir("sim3");
    fs::path c3 = write_config(d3, body);
    REQUIRE(run_cli("simulate --config " + c3.string() + " --seed 8 --out " +
                    (d3 / "out").string()) == 0);
    CHECK(slurp(d3 / "out" / "ensemble.csv") != e1);
}

TEST_CASE("stochastic tasks require a seed") {
    fs::path dir = fresh_dir("noseed");
    fs::path cfg = write_config(dir, R"({
      "schema": 1,
      "problem": {"dim": 1, "a": ["0.5"], "b": ["-x1"], "f": "0"},
      "task": {"type": "simulate", "drift": "base", "x0": [1.0]},
      "numerics": {"sim": {"dt": 0.01, "horizon": 0.5, "n_paths": 10}}
    })");
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " +
                  (dir / "out").string()) == 2);
}

TEST_CASE("help and usage") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("eigen --help") == 0);
    CHECK(run_cli("") != 0);  // a subcommand is required
}
