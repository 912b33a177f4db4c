#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lp/cli_io.hpp"
#include "lp/error.hpp"

using namespace lp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lp_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void expect_invalid(const nlohmann::json& j, const std::string& key) {
  try {
    parse_config(j, "eig");
    FAIL("expected ConfigInvalid for " << key);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigInvalid);
    CHECK(std::string(e.what()).find(key + ":") != std::string::npos);
    CHECK(exit_code_for(e) == kExitInvalid);
  }
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(nlohmann::json::parse(R"({"h": 0.1, "phi": 0.3, "inner_shape": "rect",
    "inner_xmin": -0.5, "inner_xmax": 0.5, "inner_ymin": -0.4, "inner_ymax": 0.4, "n_list": [0, 1]})"),
                                   "eig");
  CHECK(c.h == 0.1);
  CHECK(c.phi == 0.3);
  CHECK(std::holds_alternative<Rect>(c.inner));
  CHECK(c.n_list == std::vector<int>{0, 1});
  CHECK(c.eig.seed == kDefaultSeed);

  expect_invalid({{"h", -0.1}}, "h");
  expect_invalid({{"kappa", 0.0}}, "kappa");
  expect_invalid({{"phi_typo", 1.0}}, "phi_typo");
  expect_invalid({{"variant", "sideways"}}, "variant");
  expect_invalid({{"eig_tol", 1e-2}}, "eig_tol");
  expect_invalid({{"h", "small"}}, "h");
  CHECK_THROWS_AS(parse_config(nlohmann::json::object(), "dance"), Error);
}

TEST_CASE("exit codes by error kind") {
  CHECK(exit_code_for(Error(ErrorCode::ResolutionGuard, "")) == kExitInvalid);
  CHECK(exit_code_for(Error(ErrorCode::SpacingTooCoarse, "")) == kExitInvalid);
  CHECK(exit_code_for(Error(ErrorCode::NoConvergence, "")) == kExitSolver);
  CHECK(exit_code_for(Error(ErrorCode::SolverDiverged, "")) == kExitSolver);
}

TEST_CASE("atomic write replaces the file whole") {
  const fs::path dir = scratch("atomic");
  atomic_write(dir / "a.txt", "first");
  atomic_write(dir / "a.txt", "second");
  CHECK(slurp(dir / "a.txt") == "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1u);
  try {
    atomic_write(dir / "a.txt" / "b.txt", "x");
    FAIL("expected OutputUnwritable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutputUnwritable);
  }
}

TEST_CASE("eig at zero flux writes one row") {
  const fs::path dir = scratch("eig");
  RunConfig c = parse_config({{"h", 0.1}, {"phi", 0.0}, {"variant", "full"}}, "eig");
  c.out_dir = dir;
  std::ostringstream log, err;
  CHECK(run(c, log, err) == kExitOk);
  const std::string csv = slurp(dir / "eig.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(fs::exists(dir / "manifest.json"));
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m.dump().find("seed") != std::string::npos);
}

TEST_CASE("potential and verify commands") {
  const fs::path dir = scratch("verify");
  std::ostringstream log, err;
  RunConfig c = parse_config({{"h", 0.1}, {"phi", 0.3}}, "potential");
  c.out_dir = dir;
  CHECK(run(c, log, err) == kExitOk);
  CHECK(fs::exists(dir / "grid.csv"));
  CHECK(fs::exists(dir / "links.csv"));
  c.command = "verify";
  CHECK(run(c, log, err) == kExitOk);
  for (const auto& check : nlohmann::json::parse(slurp(dir / "verify.json"))) CHECK(check.at("passed") == true);
}

TEST_CASE("resolution guard maps to the invalid-input exit code") {
  const fs::path dir = scratch("guard");
  RunConfig c = parse_config({{"h", 0.1}, {"phi_min", 0.0}, {"phi_max", 100.0}, {"phi_step", 50.0}}, "sweep");
  c.out_dir = dir;
  std::ostringstream log, err;
  CHECK(run(c, log, err) == kExitInvalid);
  CHECK(err.str().find("ResolutionGuard") != std::string::npos);
}

TEST_CASE("command-line binary exit codes") {
  const fs::path dir = scratch("binary");
  {
    std::ofstream(dir / "bad.json") << R"({"h": -1})";
    std::ofstream(dir / "good.json") << R"({"h": 0.1, "phi": 0.25, "variant": "punctured"})";
  }
  const std::string exe = LPSOLVE_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status("eig --config " + (dir / "bad.json").string()) == kExitInvalid);
  CHECK(status("nonsense --config " + (dir / "good.json").string()) == kExitInvalid);
  CHECK(status("eig --config " + (dir / "good.json").string() + " --out " + (dir / "out").string()) == kExitOk);
  CHECK(fs::exists(dir / "out" / "eig.csv"));
}
