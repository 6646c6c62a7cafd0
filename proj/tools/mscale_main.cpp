#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "mscale/csv.hpp"
#include "mscale/domdec.hpp"
#include "mscale/integrator.hpp"
#include "mscale/report.hpp"
#include "mscale/scenario.hpp"
#include "mscale/solvers.hpp"

namespace {

using namespace mscale;

int run_one_scenario(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InvalidInput& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  const ParseOutcome outcome = parse_scenario(text);
  if (!outcome.ok()) {
    for (const Diagnostic& d : outcome.diagnostics) std::cerr << path << ":" << d.line << ": " << d.message << "\n";
    return 1;
  }
  const Scenario& s = *outcome.scenario;
  try {
    const Problem problem = s.build_problem();
    const Trajectory traj = run(problem, s.x0, s.t_end, s.h, s.probes);

    std::optional<Vec> oracle;
    if (s.oracle_kind == "kkt") {
      if (!problem.is_gradient()) throw InvalidInput(path + ": kkt oracle requires a gradient problem");
      oracle = limit_solution(problem.phi(), problem.psi()).point;
    } else if (s.oracle_kind == "point") {
      oracle = s.oracle_point;
    }

    Report rep = summarize(traj, oracle, s.theorem_tags());
    if (s.refinements > 0) {
      rep.refinement_table.emplace_back(s.h, traj.states.back());
      double hh = s.h;
      for (int i = 0; i < s.refinements; ++i) {
        hh *= 0.5;
        const Trajectory fine = run(problem, s.x0, s.t_end, hh, s.probes);
        rep.refinement_table.emplace_back(hh, fine.states.back());
      }
    }

    if (!s.csv_path.empty()) write_file(s.csv_path, trajectory_csv(traj));
    if (!s.report_path.empty()) write_file(s.report_path, serialize_report(rep));
    return 0;
  } catch (const InvalidInput& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return 2;
  }
}

int cmd_run(const std::vector<std::string>& files, int jobs) {
  if (jobs <= 1 || files.size() <= 1) {
    int code = 0;
    for (const auto& f : files) code = std::max(code, run_one_scenario(f));
    return code;
  }
  std::atomic<size_t> next{0};
  std::atomic<int> code{0};
  const int nthreads = std::min<int>(jobs, static_cast<int>(files.size()));
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= files.size()) return;
        const int c = run_one_scenario(files[i]);
        int prev = code.load();
        while (c > prev && !code.compare_exchange_weak(prev, c)) {
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  return code.load();
}

ConvexFunction model_psi(const std::string& kind) {
  Mat A(1, 1);
  A << 1.0;
  Vec b = Vec::Zero(1);
  if (kind == "sqdist") return ConvexFunction::sq_dist_to_affine(A, b);
  if (kind == "indicator") return ConvexFunction::indicator_affine(A, b);
  throw InvalidInput("check-h1: psi must be \"sqdist\" or \"indicator\"");
}

int cmd_check_h1(const std::string& psi_kind, const std::string& beta_spec, const std::vector<double>& p_values,
                 double horizon, double tail_window) {
  const ConvexFunction psi = model_psi(psi_kind);
  const Schedule beta = parse_schedule_spec(beta_spec).build(Schedule::Direction::Beta);
  std::vector<Vec> ps;
  for (double p : p_values) {
    Vec v(1);
    v << p;
    ps.push_back(v);
  }
  const Vec witness = Vec::Zero(1);
  const auto verdicts = h1_check(psi, ps, witness, beta, horizon, tail_window);
  for (size_t i = 0; i < verdicts.size(); ++i) {
    const H1Verdict& v = verdicts[i];
    std::cout << to_string(v.status) << " p=" << format_double(p_values[i])
              << " partial_integral=" << format_double(v.partial_integral)
              << " tail_exponent=" << format_double(v.tail_exponent_estimate)
              << " horizon=" << format_double(v.horizon) << "\n";
  }
  return 0;
}

int cmd_check_h2(const std::string& beta_spec, double k, double t0, double horizon) {
  const Schedule beta = parse_schedule_spec(beta_spec).build(Schedule::Direction::Beta);
  std::cout << (h2_check(beta, k, t0, horizon) ? "true" : "false") << "\n";
  return 0;
}

int cmd_rescale(const std::string& beta_spec, double t, int steps) {
  const Schedule beta = parse_schedule_spec(beta_spec).build(Schedule::Direction::Beta);
  std::cout << "t,t_beta,eps\n";
  for (int i = 1; i <= steps; ++i) {
    const double ti = t * i / steps;
    const RescalePoint rp = rescale_to_eps(beta, ti);
    std::cout << format_double(ti) << "," << format_double(rp.t_beta) << "," << format_double(rp.eps) << "\n";
  }
  return 0;
}

int cmd_dd_demo(Eigen::Index n, Eigen::Index split, double alpha, double beta0, int iters, int print_every) {
  const CoupledProblem cp = dd_assemble(n, split, [](double) { return 1.0; });
  const DdTrace trace = dd_run(cp, alpha, [beta0](int k) { return beta0 * sqr(1.0 + k); }, iters);
  std::cout << "iter,jump,sup_error\n";
  for (int k = 0; k < iters; ++k) {
    if (k % print_every == 0 || k + 1 == iters)
      std::cout << k << "," << format_double(trace.jump[k]) << "," << format_double(trace.sup_error[k]) << "\n";
  }
  return 0;
}

int cmd_game_demo(int iters, double alpha, double nu, int print_every) {
  // strongly curved payoffs: the alternating iteration then tracks the
  // penalized path instead of freezing once beta_k gets large
  const Mat I2 = Mat::Identity(2, 2);
  const Mat Q = 50.0 * I2;
  Vec a1(2), a2(2);
  a1 << 0.55, -0.3;
  a2 << 0.5, -0.275;
  const ConvexFunction f1 = ConvexFunction::quadratic(Q, Vec(-Q * a1), 0.5 * a1.dot(Q * a1));
  const ConvexFunction f2 = ConvexFunction::quadratic(Q, Vec(-Q * a2), 0.5 * a2.dot(Q * a2));
  Mat H = Mat::Zero(4, 4);
  H(0, 2) = H(2, 0) = 5.0;
  const Game game = Game::make(f1, f2, H, I2, I2, alpha, nu);
  const BestResponseTrace trace = best_response_run(game, Vec::Zero(2), Vec::Ones(2), iters);
  std::cout << "iter,nash_gap,constraint_residual\n";
  for (int k = 0; k <= iters; ++k) {
    if (k % print_every == 0 || k == iters)
      std::cout << k << "," << format_double(trace.nash_gap[k]) << "," << format_double(trace.constraint_residual[k])
                << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiscale penalty-dynamics toolkit"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "integrate scenario files and write CSV trajectories + reports");
  std::vector<std::string> files;
  int jobs = 1;
  run_cmd->add_option("files", files, "scenario files")->required()->expected(-1);
  run_cmd->add_option("--jobs", jobs, "run independent scenarios concurrently");

  auto* h1_cmd = app.add_subcommand("check-h1", "audit the penalty-growth integrability condition");
  std::string h1_psi = "sqdist", h1_beta = "power 1 2";
  std::vector<double> h1_p;
  double h1_horizon = 2000.0, h1_window = 200.0;
  h1_cmd->add_option("--psi", h1_psi, "model coupling: sqdist | indicator");
  h1_cmd->add_option("--beta", h1_beta, "schedule spec, e.g. \"power 1 2\"");
  h1_cmd->add_option("--p", h1_p, "normal directions to audit (default 1)");
  h1_cmd->add_option("--horizon", h1_horizon, "quadrature horizon");
  h1_cmd->add_option("--tail-window", h1_window, "tail-fit window");

  auto* h2_cmd = app.add_subcommand("check-h2", "audit the derivative growth bound 0 <= beta' <= k beta");
  std::string h2_beta = "power 1 2";
  double h2_k = 2.0, h2_t0 = 0.0, h2_horizon = 1000.0;
  h2_cmd->add_option("--beta", h2_beta, "schedule spec");
  h2_cmd->add_option("--k", h2_k, "growth constant")->required();
  h2_cmd->add_option("--t0", h2_t0, "start of the audited window");
  h2_cmd->add_option("--horizon", h2_horizon, "end of the audited window");

  auto* rs_cmd = app.add_subcommand("rescale", "print the (t, t_beta, eps) dictionary table");
  std::string rs_beta = "power 1 2";
  double rs_t = 1.0;
  int rs_steps = 1;
  rs_cmd->add_option("--beta", rs_beta, "schedule spec");
  rs_cmd->add_option("--t", rs_t, "largest rescaled time")->required();
  rs_cmd->add_option("--steps", rs_steps, "number of table rows");

  auto* dd_cmd = app.add_subcommand("dd-demo", "alternating two-subdomain Poisson solve, error vs iteration");
  Eigen::Index dd_n = 101, dd_split = 50;
  double dd_alpha = 1.0, dd_beta0 = 0.01;
  int dd_iters = 3000, dd_every = 100;
  dd_cmd->add_option("--n", dd_n, "number of grid subintervals");
  dd_cmd->add_option("--split", dd_split, "interface node index");
  dd_cmd->add_option("--alpha", dd_alpha, "interface memory coefficient");
  dd_cmd->add_option("--beta0", dd_beta0, "penalty scale: beta_k = beta0 (1+k)^2");
  dd_cmd->add_option("--iters", dd_iters, "iterations");
  dd_cmd->add_option("--print-every", dd_every, "table row stride");

  auto* game_cmd = app.add_subcommand("game-demo", "alternating best response for a quadratic team game");
  int game_iters = 200, game_every = 10;
  double game_alpha = 1.0, game_nu = 1.0;
  game_cmd->add_option("--iters", game_iters, "iterations");
  game_cmd->add_option("--alpha", game_alpha, "player-1 cost to change");
  game_cmd->add_option("--nu", game_nu, "player-2 cost to change");
  game_cmd->add_option("--print-every", game_every, "table row stride");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(files, jobs);
    if (h1_cmd->parsed()) {
      if (h1_p.empty()) h1_p.push_back(1.0);
      return cmd_check_h1(h1_psi, h1_beta, h1_p, h1_horizon, h1_window);
    }
    if (h2_cmd->parsed()) return cmd_check_h2(h2_beta, h2_k, h2_t0, h2_horizon);
    if (rs_cmd->parsed()) return cmd_rescale(rs_beta, rs_t, rs_steps);
    if (dd_cmd->parsed()) return cmd_dd_demo(dd_n, dd_split, dd_alpha, dd_beta0, dd_iters, dd_every);
    if (game_cmd->parsed()) return cmd_game_demo(game_iters, game_alpha, game_nu, game_every);
  } catch (const mscale::InvalidInput& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const mscale::NumericalError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
