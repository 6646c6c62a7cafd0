#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mscale/integrator.hpp"
#include "mscale/solvers.hpp"

using namespace mscale;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

ConvexFunction half_sqnorm(Eigen::Index d) {
  return ConvexFunction::quadratic(Mat::Identity(d, d), Vec::Zero(d), 0.0);
}

// small hierarchical instance on R^3: strongly convex phi, rank-1 coupling
struct QuadInstance {
  Mat Q{3, 3};
  Vec c{3};
  Mat A{1, 3};
  Vec b{1};
  QuadInstance() {
    Q << 2.0, 0.3, 0.0, 0.3, 1.5, 0.2, 0.0, 0.2, 1.0;
    c << 0.5, -0.3, 0.2;
    A << 1.0, 1.0, -1.0;
    b << 1.0;
  }
  ConvexFunction phi() const { return ConvexFunction::quadratic(Q, c, 0.0); }
  ConvexFunction psi() const { return ConvexFunction::least_squares(A, b); }
  Problem problem(double p = 2.0) const {
    return Problem::gradient(phi(), psi(), Schedule::power_law(1.0, p));
  }
};

}  // namespace

TEST_CASE("implicit gradient step: trivial and quadratic cases") {
  const auto zero2 = ConvexFunction::zero(2);
  const Problem trivial = Problem::gradient(zero2, zero2, Schedule::constant(1.0));
  const Vec x = v2(0.4, -1.1);
  CHECK((step(trivial, x, 1.0, 0.5) - x).norm() == doctest::Approx(0.0));

  const Problem sd = Problem::gradient(half_sqnorm(2), ConvexFunction::zero(2), Schedule::constant(1.0));
  CHECK((step(sd, v2(2.0, 0.0), 1.0, 1.0) - v2(1.0, 0.0)).norm() == doctest::Approx(0.0));
  CHECK_THROWS_AS(step(sd, x, 1.0, 0.0), InvalidInput);
}

TEST_CASE("implicit gradient step matches the dense-solve oracle") {
  QuadInstance inst;
  const double beta_a = 3.0;
  const Problem p = Problem::gradient(inst.phi(), inst.psi(), Schedule::constant(beta_a));
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int it = 0; it < 50; ++it) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = u(rng);
    const double h = 0.01 + 0.05 * it;
    const Vec got = step(p, x, 1.0, h);
    const Mat K = Mat::Identity(3, 3) / h + inst.Q + beta_a * inst.A.transpose() * inst.A;
    const Vec rhs = x / h - inst.c + beta_a * inst.A.transpose() * inst.b;
    const Vec expect = K.llt().solve(rhs);
    REQUIRE((got - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
  }
}

TEST_CASE("schedule weight is evaluated at the step target time") {
  QuadInstance inst;
  const Problem p = Problem::gradient(inst.phi(), inst.psi(), Schedule::power_law(1.0, 2.0));
  const Vec x = Vec::Ones(3);
  const double h = 0.1, t_next = 2.0;
  const double beta_next = sqr(1.0 + t_next);
  const Mat K = Mat::Identity(3, 3) / h + inst.Q + beta_next * inst.A.transpose() * inst.A;
  const Vec expect = K.llt().solve(Vec(x / h - inst.c + beta_next * inst.A.transpose() * inst.b));
  CHECK((step(p, x, t_next, h) - expect).norm() <= 1e-12);
}

TEST_CASE("monotone resolvent step") {
  // zero operator reduces to the gradient step with phi = 0
  QuadInstance inst;
  const auto zero_op = MonotoneOperator::affine(Mat::Zero(3, 3), Vec::Zero(3));
  const Problem mono = Problem::monotone(zero_op, inst.psi(), Schedule::constant(2.0));
  const Problem grad = Problem::gradient(ConvexFunction::zero(3), inst.psi(), Schedule::constant(2.0));
  const Vec x = Vec::Ones(3);
  CHECK((step_mami(mono, x, 1.0, 0.3) - step(grad, x, 1.0, 0.3)).norm() <= 1e-12);

  // identity operator: x+ = x / (1 + h)
  const auto id_op = MonotoneOperator::affine(Mat::Identity(2, 2), Vec::Zero(2));
  CHECK(id_op.strong_monotonicity_modulus() == doctest::Approx(1.0));
  const Problem pid = Problem::monotone(id_op, ConvexFunction::zero(2), Schedule::constant(1.0));
  CHECK((step_mami(pid, v2(1.0, 2.0), 1.0, 0.5) - v2(1.0, 2.0) / 1.5).norm() <= 1e-12);

  // quarter-turn rotation: x+ = (I + hR)^{-1} x, explicit 2x2 inverse oracle
  const auto rot = MonotoneOperator::rotation2d(M_PI / 2.0);
  CHECK(rot.strong_monotonicity_modulus() == 0.0);
  const Problem prot = Problem::monotone(rot, ConvexFunction::zero(2), Schedule::constant(1.0));
  const double h = 0.05;
  const Vec xr = v2(1.0, 0.0);
  Mat inv(2, 2);
  inv << 1.0, h, -h, 1.0;
  inv /= (1.0 + h * h);
  CHECK((step_mami(prot, xr, 1.0, h) - inv * xr).norm() <= 1e-14);

  CHECK_THROWS_AS(MonotoneOperator::rotation2d(M_PI), InvalidInput);
  CHECK_THROWS_AS(MonotoneOperator::affine(Mat(-Mat::Identity(2, 2)), Vec::Zero(2)), InvalidInput);
}

TEST_CASE("monotone resolvent with nonsmooth psi uses the inner splitting") {
  Mat M(2, 2);
  M << 1.0, -0.7, 0.7, 1.0;
  const auto op = MonotoneOperator::affine(M, v2(0.2, -0.1));
  const auto psi = ConvexFunction::sq_dist_to_box(v2(0.0, 0.0), v2(1.0, 1.0));
  // force the splitting path through a psi without a quadratic form
  const Problem p = Problem::monotone(op, psi, Schedule::constant(5.0));
  const Vec x = v2(2.0, -1.5);
  const double h = 0.2;
  const Vec xp = step_mami(p, x, 1.0, h);
  // verify the inclusion residual: x+ + h A(x+) + h beta eta = x with
  // eta = x+ - proj_box(x+) the gradient of the squared distance
  const Vec eta = xp - xp.cwiseMax(v2(0.0, 0.0)).cwiseMin(v2(1.0, 1.0));
  const Vec resid = xp + h * op.apply(xp) + h * 5.0 * eta - x;
  CHECK(resid.norm() <= 1e-8);
}

TEST_CASE("run: steepest descent decays geometrically") {
  const Problem p = Problem::gradient(half_sqnorm(2), ConvexFunction::zero(2), Schedule::constant(1.0));
  const Trajectory traj = run(p, v2(1.0, 0.0), 5.0, 0.01);
  CHECK(traj.states.back().norm() <= std::exp(-4.9));
  for (size_t k = 1; k < traj.records.size(); ++k)
    CHECK(traj.records[k].phi_val < traj.records[k - 1].phi_val);
}

TEST_CASE("run: hierarchical instance reaches the limit solution") {
  QuadInstance inst;
  const auto sol = limit_solution(inst.phi(), inst.psi());
  Vec x0(3);
  x0 << 1.0, 2.0, 0.0;  // infeasible start, psi(x0) > 0
  const Trajectory traj = run(inst.problem(), x0, 100.0, 0.01, {sol.point});
  CHECK((traj.states.back() - sol.point).norm() <= 1e-3);
  const double bp0 = traj.records.front().beta_psi;
  CHECK(traj.records.back().beta_psi <= 1e-3 * bp0);
  CHECK(traj.records.back().psi_val <= 1e-6);

  // energies: e1 -> 0 and e2 -> phi(limit)
  const double phi_star = eval(inst.phi(), sol.point);
  CHECK(std::abs(traj.records.back().e1) <= 1e-3 * (1.0 + std::abs(traj.records.front().e1)));
  CHECK(std::abs(traj.records.back().e2 - phi_star) <= 1e-3 * (1.0 + std::abs(phi_star)));

  const ConvergenceReport rep = convergence_report(traj, sol.point);
  CHECK(rep.verdict == ConvergenceReport::Verdict::Converged);
  CHECK(std::abs(rep.final_e1) <= 1e-4);

  // record-level identities
  for (size_t k = 0; k < traj.records.size(); ++k) {
    const StepRecord& r = traj.records[k];
    REQUIRE(r.beta_psi == r.beta_val * r.psi_val);
    if (k > 0) {
      REQUIRE(r.cum_beta_psi >= traj.records[k - 1].cum_beta_psi);
      REQUIRE(traj.times[k] > traj.times[k - 1]);
    }
  }
}

TEST_CASE("run: implicit-step dissipation on a nonsmooth instance") {
  Mat A(1, 2);
  A << 1.0, 1.0;
  const auto phi = ConvexFunction::absolute_sum(2);
  const auto psi = ConvexFunction::sq_dist_to_affine(A, Vec::Ones(1));
  const Problem p = Problem::gradient(phi, psi, Schedule::power_law(1.0, 2.0));
  const Trajectory traj = run(p, v2(2.0, -1.0), 1.0, 0.01);
  for (size_t k = 1; k < traj.states.size(); ++k) {
    const double beta = traj.records[k].beta_val;
    const Vec& xp = traj.states[k];
    const Vec& x = traj.states[k - 1];
    const double lhs = eval(phi, xp) + beta * eval(psi, xp) + (xp - x).squaredNorm() / (2.0 * 0.01);
    const double rhs = eval(phi, x) + beta * eval(psi, x);
    REQUIRE(lhs <= rhs + 1e-9);
  }
}

TEST_CASE("run: summability surrogates stay bounded when the horizon doubles") {
  QuadInstance inst;
  const auto sol = limit_solution(inst.phi(), inst.psi());
  const Trajectory t1 = run(inst.problem(), Vec::Ones(3), 40.0, 0.01, {sol.point});
  const Trajectory t2 = run(inst.problem(), Vec::Ones(3), 80.0, 0.01, {sol.point});
  CHECK(t2.records.back().cum_beta_psi <= 1.1 * t1.records.back().cum_beta_psi);

  auto pos_increments = [](const Trajectory& tr) {
    double s = 0.0;
    for (size_t k = 1; k < tr.records.size(); ++k)
      s += std::max(0.0, tr.records[k].hz[0] - tr.records[k - 1].hz[0]);
    return s;
  };
  const double p1 = pos_increments(t1);
  const double p2 = pos_increments(t2);
  CHECK(p2 <= 1.1 * p1 + 1e-12);
}

TEST_CASE("run aborts with the partial trajectory attached") {
  // two nearly parallel lines make the splitting exceed its iteration cap
  Mat A1(1, 2), A2(1, 2);
  A1 << 1.0, 0.0;
  A2 << 1.0, 1e-5;
  const auto phi = ConvexFunction::sum(ConvexFunction::indicator_affine(A1, Vec::Zero(1)),
                                       ConvexFunction::indicator_affine(A2, Vec::Ones(1)));
  const Problem p = Problem::gradient(phi, ConvexFunction::zero(2), Schedule::constant(1.0));
  try {
    run(p, v2(0.0, 0.0), 1.0, 0.5);
    FAIL("expected RunError");
  } catch (const RunError& e) {
    CHECK(e.partial_trajectory.states.size() >= 1);
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("ergodic mean") {
  // constant trajectory: the mean is that constant, exactly
  const Problem still = Problem::gradient(ConvexFunction::zero(2), ConvexFunction::zero(2), Schedule::constant(1.0));
  const Trajectory traj = run(still, v2(0.3, -0.7), 1.0, 0.1);
  for (const Vec& m : ergodic_mean(traj)) CHECK((m - v2(0.3, -0.7)).norm() == doctest::Approx(0.0));

  // rotation orbit: time average collapses like 2 sin(T/2) / T
  const Problem rot = Problem::monotone(MonotoneOperator::rotation2d(M_PI / 2.0), ConvexFunction::zero(2),
                                        Schedule::constant(1.0));
  const Trajectory orbit = run(rot, v2(1.0, 0.0), 100.0, 0.001, {v2(0.0, 0.0)});
  const Vec mean = ergodic_mean(orbit).back();
  CHECK(mean.norm() <= 0.05);
  const double closed = 2.0 * std::abs(std::sin(50.0)) / 100.0;
  CHECK(mean.norm() == doctest::Approx(closed).epsilon(0.05));
  // the in-run running mean agrees with the recomputed one
  CHECK((orbit.records.back().ergodic_mean - mean).norm() <= 1e-12);

  // Cesaro: a convergent trajectory's mean drifts to the same limit
  QuadInstance inst;
  const auto sol = limit_solution(inst.phi(), inst.psi());
  const Trajectory conv = run(inst.problem(), Vec::Ones(3), 80.0, 0.01);
  const auto means = ergodic_mean(conv);
  const double d_end = (means.back() - sol.point).norm();
  const double d_half = (means[means.size() / 2] - sol.point).norm();
  CHECK(d_end < d_half);
  CHECK(d_end <= 0.2);
}

TEST_CASE("rotation orbit keeps its radius and reports ergodic-only") {
  const Problem rot = Problem::monotone(MonotoneOperator::rotation2d(M_PI / 2.0), ConvexFunction::zero(2),
                                        Schedule::constant(1.0));
  const Trajectory orbit = run(rot, v2(1.0, 0.0), 100.0, 0.001, {v2(0.0, 0.0)});
  const double n = orbit.states.back().norm();
  CHECK(n >= 0.99);
  CHECK(n <= 1.0);
  CHECK(std::abs(n - 1.0) <= 1e-6);  // norm constant within tolerance
  const ConvergenceReport rep = convergence_report(orbit);
  CHECK(rep.verdict == ConvergenceReport::Verdict::ErgodicOnly);
}

TEST_CASE("trivial run is converged with constant diagnostics") {
  const Problem still = Problem::gradient(ConvexFunction::zero(2), ConvexFunction::zero(2), Schedule::constant(1.0));
  const Trajectory traj = run(still, v2(0.5, 0.5), 2.0, 0.1, {v2(0.0, 0.0)});
  const ConvergenceReport rep = convergence_report(traj);
  CHECK(rep.verdict == ConvergenceReport::Verdict::Converged);
  for (const auto& r : traj.records) {
    CHECK(r.phi_val == 0.0);
    CHECK(r.psi_val == 0.0);
    CHECK(r.hz[0] == doctest::Approx(0.25));
  }
}

TEST_CASE("grid refinement shows first-order decay of the final state") {
  QuadInstance inst;
  const Vec x0 = Vec::Ones(3);
  // transient window; late horizons contract the h-dependence below roundoff
  const double t_end = 2.0;
  auto final_state = [&](double h) { return run(inst.problem(), x0, t_end, h).states.back(); };
  const Vec rich = 2.0 * final_state(0.005) - final_state(0.01);
  const double e4 = (final_state(0.04) - rich).norm();
  const double e2 = (final_state(0.02) - rich).norm();
  const double e1 = (final_state(0.01) - rich).norm();
  CHECK(e2 / e4 >= 0.35);
  CHECK(e2 / e4 <= 0.65);
  CHECK(e1 / e2 >= 0.35);
  CHECK(e1 / e2 <= 0.65);
}

TEST_CASE("beta and epsilon parameterizations agree through the dictionary") {
  QuadInstance inst;
  const Schedule beta = Schedule::power_law(1.0, 2.0);
  const Problem pb = Problem::gradient(inst.phi(), inst.psi(), beta);
  const Problem pe = Problem::gradient(inst.phi(), inst.psi(), Schedule::dictionary_epsilon(beta),
                                       Parameterization::Epsilon);
  const Vec x0 = Vec::Ones(3);
  const double t_eps_end = 20.0;
  const double t_beta_end = beta.inverse_cumulative(t_eps_end);
  const double h = 2e-4;
  const Trajectory tb = run(pb, x0, t_beta_end + 1e-9, h);
  const Trajectory te = run(pe, x0, t_eps_end, h);

  auto interp = [](const Trajectory& tr, double t) {
    const double h0 = tr.times[1] - tr.times[0];
    const auto k = static_cast<size_t>(std::min(t / h0, static_cast<double>(tr.states.size() - 2)));
    const double w = (t - tr.times[k]) / h0;
    return Vec((1.0 - w) * tr.states[k] + w * tr.states[k + 1]);
  };
  double worst = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double t = t_eps_end * i / 10.0;
    const double s = beta.inverse_cumulative(t);
    worst = std::max(worst, (interp(tb, s) - interp(te, t)).norm());
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("direct epsilon control tracks the quasi-static envelope") {
  // x' + d(psi)(x) + eps(t) grad(phi)(x) = 0 with eps = 1/(1+t): the distance
  // to the constraint settles at eps(t) |grad phi| for the squared-distance
  // coupling, an exact quasi-static formula to compare against
  Mat A(1, 2);
  A << 1.0, -1.0;
  const Vec target = (Vec(2) << 2.0, 0.0).finished();
  const auto phi = ConvexFunction::quadratic(Mat::Identity(2, 2), Vec(-target), 0.5 * target.squaredNorm());
  const auto psi = ConvexFunction::sq_dist_to_affine(A, Vec::Zero(1));
  const Schedule eps = Schedule::power_law(1.0, -1.0, Schedule::Direction::Epsilon);
  const Problem p = Problem::gradient(phi, psi, eps, Parameterization::Epsilon);
  const Trajectory traj = run(p, (Vec(2) << 2.0, -1.0).finished(), 150.0, 0.01);

  const Vec x = traj.states.back();
  const double e = 1.0 / (1.0 + 150.0);
  const double grad_norm = (x - target).norm();
  const double predicted_psi = 0.5 * sqr(e * grad_norm);
  CHECK(traj.records.back().psi_val == doctest::Approx(predicted_psi).epsilon(0.05));
  // beta column carries 1/eps for epsilon-parameterized runs
  CHECK(traj.records.back().beta_val == doctest::Approx(151.0));
  // the state heads for the constrained minimizer (1,1)
  CHECK((x - (Vec(2) << 1.0, 1.0).finished()).norm() <= 0.05);
}

TEST_CASE("problem construction validates psi") {
  // min value 1, not 0
  const auto bad_psi = ConvexFunction::quadratic(Mat::Identity(2, 2), Vec::Zero(2), 1.0);
  CHECK_THROWS_AS(Problem::gradient(half_sqnorm(2), bad_psi, Schedule::constant(1.0)), InvalidInput);
  // no argmin set capability
  const auto ball = ConvexFunction::indicator_ball(2, 1.0);
  CHECK_THROWS_AS(Problem::gradient(half_sqnorm(2), ball, Schedule::constant(1.0)), InvalidInput);
}
