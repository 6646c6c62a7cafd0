#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mscale/csv.hpp"
#include "mscale/schedule.hpp"

using namespace mscale;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int exit_code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(const std::string& args, const fs::path& cwd) {
  const fs::path out = cwd / "stdout.txt";
  const fs::path err = cwd / "stderr.txt";
  const std::string cmd = "cd '" + cwd.string() + "' && '" + MSCALE_CLI_PATH + "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int rc = std::system(cmd.c_str());
  Invocation iv;
  iv.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  iv.out = read_file(out.string());
  iv.err = read_file(err.string());
  return iv;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("mscale_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string scenario_path(const char* name) { return std::string(MSCALE_SCENARIO_DIR) + "/" + name; }

}  // namespace

TEST_CASE("run writes CSV and report, silently, exit 0") {
  const auto dir = fresh_dir("run");
  const auto iv = invoke("run " + scenario_path("hierarchical.scn"), dir);
  CHECK(iv.exit_code == 0);
  CHECK(iv.out.empty());
  CHECK(iv.err.empty());

  const std::string csv = read_file((dir / "hierarchical.csv").string());
  std::istringstream ss(csv);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "t,x_0,x_1,phi,psi,beta,beta_psi,e1,e2,hz_0,xmean_0,xmean_1,cum_beta_psi,step_norm");
  // rows strictly increasing in t
  double prev = -1.0;
  std::string line;
  int rows = 0;
  while (std::getline(ss, line)) {
    const double t = std::stod(line.substr(0, line.find(',')));
    REQUIRE(t > prev);
    prev = t;
    ++rows;
  }
  CHECK(rows == 20001);

  const std::string report = read_file((dir / "hierarchical.report").string());
  CHECK(report.find("verdict = \"converged\"") != std::string::npos);
  CHECK(report.find("tag_thm3.1.i_pass = true") != std::string::npos);
}

TEST_CASE("repeated runs are byte-identical") {
  const auto d1 = fresh_dir("det1");
  const auto d2 = fresh_dir("det2");
  for (const char* scn : {"hierarchical.scn", "rotation.scn", "epsilon.scn"}) {
    CAPTURE(scn);
    REQUIRE(invoke("run " + scenario_path(scn), d1).exit_code == 0);
    REQUIRE(invoke("run " + scenario_path(scn), d2).exit_code == 0);
  }
  for (const auto& entry : fs::directory_iterator(d1)) {
    const auto name = entry.path().filename().string();
    if (name.find(".csv") == std::string::npos && name.find(".report") == std::string::npos) continue;
    CAPTURE(name);
    CHECK(read_file(entry.path().string()) == read_file((d2 / name).string()));
  }
}

TEST_CASE("refinement study lands in the report") {
  const auto dir = fresh_dir("refine");
  std::string text = read_file(scenario_path("hierarchical.scn"));
  text.replace(text.find("refinements = 0"), 15, "refinements = 2");
  text.replace(text.find("t_end = 200"), 11, "t_end = 5");
  {
    std::ofstream f(dir / "refine.scn");
    f << text;
  }
  const auto iv = invoke("run refine.scn", dir);
  CHECK(iv.exit_code == 0);
  const std::string report = read_file((dir / "hierarchical.report").string());
  CHECK(report.find("refinement_0_h = 0.01") != std::string::npos);
  CHECK(report.find("refinement_1_h = 0.005") != std::string::npos);
  CHECK(report.find("refinement_2_h = 0.0025") != std::string::npos);
  CHECK(report.find("refinement_2_state = [") != std::string::npos);
}

TEST_CASE("run supports parallel scenario execution") {
  const auto dir = fresh_dir("jobs");
  const auto iv =
      invoke("run " + scenario_path("hierarchical.scn") + " " + scenario_path("rotation.scn") + " --jobs 2", dir);
  CHECK(iv.exit_code == 0);
  CHECK(fs::exists(dir / "hierarchical.csv"));
  CHECK(fs::exists(dir / "rotation.csv"));
}

TEST_CASE("validation failures exit 1 with diagnostics on stderr") {
  const auto dir = fresh_dir("bad");
  {
    std::ofstream f(dir / "bad.scn");
    f << "[problem]\nkind = \"gradient\"\n\n[phi]\nkind = \"quadratic\"\nq = [1]\nq_rows = 1\nc = [0]\nr = 0\n"
      << "\n[psi]\nkind = \"zero\"\ndim = 1\n\n[integrator]\nh = -1\nt_end = 1\n";
  }
  const auto iv = invoke("run bad.scn", dir);
  CHECK(iv.exit_code == 1);
  CHECK(iv.out.empty());
  CHECK(iv.err.find("h") != std::string::npos);
  CHECK(iv.err.find("bad.scn:16") != std::string::npos);
}

TEST_CASE("numerical failures exit 2") {
  const auto dir = fresh_dir("numfail");
  {
    // kkt oracle on an objective that is unbounded below over the constraint
    std::ofstream f(dir / "unbounded.scn");
    f << "[problem]\nkind = \"gradient\"\n\n[phi]\nkind = \"quadratic\"\nq = [0, 0, 0, 0]\nq_rows = 2\n"
      << "c = [0, 1]\nr = 0\n\n[psi]\nkind = \"indicator_affine\"\na = [1, 0]\na_rows = 1\nb = [1]\n\n"
      << "[schedule]\nkind = \"power\"\na = 1\np = 2\n\n[integrator]\nh = 0.1\nt_end = 0.5\nx0 = [1, 0]\n\n"
      << "[oracle]\nkind = \"kkt\"\n";
  }
  const auto iv = invoke("run unbounded.scn", dir);
  CHECK(iv.exit_code == 2);
  CHECK(iv.err.find("unbounded") != std::string::npos);
}

TEST_CASE("check-h1 prints the verdicts") {
  const auto dir = fresh_dir("h1");
  auto iv = invoke("check-h1 --psi sqdist --beta \"power 1 2\"", dir);
  CHECK(iv.exit_code == 0);
  CHECK(iv.out.rfind("Finite", 0) == 0);
  iv = invoke("check-h1 --psi sqdist --beta \"power 1 1\"", dir);
  CHECK(iv.out.rfind("Divergent", 0) == 0);
  iv = invoke("check-h1 --psi indicator --beta \"power 1 1\"", dir);
  CHECK(iv.out.rfind("Finite", 0) == 0);
}

TEST_CASE("check-h2 prints a boolean verdict") {
  const auto dir = fresh_dir("h2");
  auto iv = invoke("check-h2 --beta \"exp 1 1\" --k 1", dir);
  CHECK(iv.exit_code == 0);
  CHECK(iv.out == "true\n");
  iv = invoke("check-h2 --beta \"exp 1 1\" --k 0.5", dir);
  CHECK(iv.out == "false\n");
}

TEST_CASE("rescale table satisfies the dictionary identity") {
  const auto dir = fresh_dir("rescale");
  const auto iv = invoke("rescale --beta \"power 1 2\" --t 1", dir);
  CHECK(iv.exit_code == 0);
  std::istringstream ss(iv.out);
  std::string header, row;
  std::getline(ss, header);
  CHECK(header == "t,t_beta,eps");
  REQUIRE(std::getline(ss, row));
  const auto c1 = row.find(',');
  const auto c2 = row.find(',', c1 + 1);
  const double t_beta = std::stod(row.substr(c1 + 1, c2 - c1 - 1));
  const double eps = std::stod(row.substr(c2 + 1));
  const Schedule beta = Schedule::power_law(1.0, 2.0);
  CHECK(std::abs(eps * beta.value(t_beta) - 1.0) <= 1e-10);
}

TEST_CASE("demo subcommands emit their tables") {
  const auto dir = fresh_dir("demos");
  auto iv = invoke("dd-demo --n 21 --split 8 --iters 200 --print-every 100", dir);
  CHECK(iv.exit_code == 0);
  CHECK(iv.out.rfind("iter,jump,sup_error", 0) == 0);
  iv = invoke("game-demo --iters 20 --print-every 10", dir);
  CHECK(iv.exit_code == 0);
  CHECK(iv.out.rfind("iter,nash_gap,constraint_residual", 0) == 0);
}
