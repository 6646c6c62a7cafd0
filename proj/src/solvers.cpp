#include "mscale/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace mscale {

namespace {

// one dense saddle-point solve  [G A'; A 0] [x; mu] = [-g; b]
LimitSolution solve_kkt(const ConvexFunction::QuadraticForm& qf, const Mat& A, const Vec& b) {
  const Eigen::Index n = qf.G.cols();
  const Eigen::Index m = A.rows();
  Mat K = Mat::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = qf.G;
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  Vec rhs(n + m);
  rhs.head(n) = -qf.g;
  rhs.tail(m) = b;

  Eigen::FullPivLU<Mat> lu(K);
  lu.setThreshold(1e-10);
  LimitSolution out;
  if (lu.rank() == n + m) {
    const Vec sol = lu.solve(rhs);
    out.point = sol.head(n);
    out.multiplier = sol.tail(m);
  } else {
    const auto cod = K.completeOrthogonalDecomposition();
    const Vec sol = cod.solve(rhs);
    if ((K * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm()))
      throw NumericalError("limit_solution: KKT system inconsistent (objective unbounded below on the set)",
                           (K * sol - rhs).norm());
    out.point = sol.head(n);
    out.multiplier = sol.tail(m);
    out.min_norm_selected = true;
  }
  out.stationarity_residual = (qf.G * out.point + qf.g + A.transpose() * out.multiplier).norm();
  out.feasibility_residual = (A * out.point - b).norm();
  return out;
}

}  // namespace

LimitSolution limit_solution_penalty(const ConvexFunction& phi, const ConvexFunction& psi) {
  require(phi.dim() == psi.dim(), "limit_solution: phi/psi dimension mismatch");
  require(psi.has_argmin_set(), "limit_solution: psi must expose an argmin set");
  const ArgminSet& C = *psi.argmin_set();
  // 1/2 dist^2 penalty toward C, independent of how psi grows off the set
  ConvexFunction penalty = [&]() {
    switch (C.kind()) {
      case ArgminSet::Kind::Affine:
        return ConvexFunction::sq_dist_to_affine(C.affine_matrix(), C.affine_rhs());
      case ArgminSet::Kind::Box:
        return ConvexFunction::sq_dist_to_box(C.box_lo(), C.box_hi());
      case ArgminSet::Kind::Singleton: {
        const Eigen::Index d = C.dim();
        return ConvexFunction::quadratic(Mat::Identity(d, d), Vec(-C.point()), 0.5 * C.point().squaredNorm());
      }
      case ArgminSet::Kind::WholeSpace:
        return ConvexFunction::zero(C.dim());
    }
    return ConvexFunction::zero(C.dim());
  }();

  Vec x = Vec::Zero(phi.dim());
  const double tau = 1.0;
  auto stage = [&](double beta) {
    const ConvexFunction obj = ConvexFunction::sum(phi, ConvexFunction::scale(penalty, beta));
    for (int it = 0; it < 2000; ++it) {
      const Vec next = prox(obj, tau, x);
      const double move = (next - x).norm();
      x = next;
      if (x.norm() > 1e10) throw NumericalError("limit_solution: penalty iterates blew up (unbounded below?)", x.norm());
      if (move <= 1e-12 * (1.0 + x.norm())) break;
    }
  };
  double beta = 0.0;
  for (const double b : {1e2, 1e4, 1e6, 1e8}) {
    beta = b;
    stage(beta);
  }
  // keep climbing until the posted feasibility contract holds
  while ((x - C.project(x)).norm() > 1e-8 && beta < 1e13) {
    beta *= 100.0;
    stage(beta);
  }
  LimitSolution out;
  out.point = x;
  out.feasibility_residual = (x - C.project(x)).norm();
  if (out.feasibility_residual > 1e-8)
    throw NumericalError("limit_solution: penalty continuation left infeasible point", out.feasibility_residual);
  return out;
}

LimitSolution limit_solution(const ConvexFunction& phi, const ConvexFunction& psi) {
  require(phi.dim() == psi.dim(), "limit_solution: phi/psi dimension mismatch");
  require(psi.has_argmin_set(), "limit_solution: psi must expose an argmin set");
  const ArgminSet& C = *psi.argmin_set();
  const auto& qf = phi.quadratic_form();

  if (qf && C.kind() == ArgminSet::Kind::Affine) {
    return solve_kkt(*qf, C.affine_matrix(), C.affine_rhs());
  }
  if (qf && C.kind() == ArgminSet::Kind::Singleton) {
    LimitSolution out;
    out.point = C.point();
    out.feasibility_residual = 0.0;
    return out;
  }
  if (qf && C.kind() == ArgminSet::Kind::WholeSpace) {
    // unconstrained quadratic minimum
    const Vec x = qf->G.completeOrthogonalDecomposition().solve(Vec(-qf->g));
    if ((qf->G * x + qf->g).norm() > 1e-8 * (1.0 + qf->g.norm()))
      throw NumericalError("limit_solution: unbounded below (inconsistent normal equations)");
    LimitSolution out;
    out.point = x;
    out.stationarity_residual = (qf->G * x + qf->g).norm();
    Eigen::FullPivLU<Mat> lu(qf->G);
    lu.setThreshold(1e-10);
    out.min_norm_selected = lu.rank() < qf->G.cols();
    return out;
  }
  return limit_solution_penalty(phi, psi);
}

// ---------------------------------------------------------------------------
// best response

Game Game::make(ConvexFunction f1, ConvexFunction f2, Mat coupling, Mat L1, Mat L2, double alpha, double nu,
                std::function<double(int)> beta_seq) {
  const Eigen::Index d1 = f1.dim(), d2 = f2.dim();
  const Eigen::Index d = d1 + d2;
  require(coupling.rows() == d && coupling.cols() == d, "game: coupling must act on the product space");
  require((coupling - coupling.transpose()).lpNorm<Eigen::Infinity>() <=
              1e-9 * (1.0 + coupling.lpNorm<Eigen::Infinity>()),
          "game: coupling must be symmetric");
  require(L1.cols() == d1 && L2.cols() == d2, "game: resource map/block dimension mismatch");
  require(L1.rows() == L2.rows(), "game: resource maps must share the output space");
  require(alpha >= 0.0 && nu >= 0.0, "game: costs to change must be nonnegative");

  // joint convexity of f1 + f2 + phi
  Mat H = 0.5 * (coupling + coupling.transpose());
  Mat total = H;
  if (f1.quadratic_form()) total.topLeftCorner(d1, d1) += f1.quadratic_form()->G;
  if (f2.quadratic_form()) total.bottomRightCorner(d2, d2) += f2.quadratic_form()->G;
  Eigen::SelfAdjointEigenSolver<Mat> es(total, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, std::abs(es.eigenvalues().maxCoeff()));
  require(es.eigenvalues().minCoeff() >= -1e-9 * scale, "game: joint payoff f1 + f2 + phi must be convex");

  std::function<double(int)> seq = beta_seq ? std::move(beta_seq) : [](int k) { return sqr(1.0 + k); };
  // strict growth expected; spot-check the head of the sequence
  for (int k = 0; k + 1 < 8; ++k) require(seq(k + 1) > seq(k), "game: beta_k must be strictly increasing");
  return Game{std::move(f1), std::move(f2), std::move(H), std::move(L1), std::move(L2), alpha, nu, std::move(seq)};
}

ConvexFunction Game::potential() const {
  if (coupling.isZero(0.0)) return ConvexFunction::separable({f1, f2});
  // the coupling alone may be indefinite; fold it into one joint quadratic
  const auto& q1 = f1.quadratic_form();
  const auto& q2 = f2.quadratic_form();
  require(q1 && q2, "game: a nonzero coupling needs quadratic individual payoffs");
  const Eigen::Index d1 = dim1(), d2 = dim2();
  Mat G = coupling;
  G.topLeftCorner(d1, d1) += q1->G;
  G.bottomRightCorner(d2, d2) += q2->G;
  Vec g(d1 + d2);
  g << q1->g, q2->g;
  return ConvexFunction::quadratic(G, g, q1->r + q2->r);
}

ConvexFunction Game::constraint_coupling() const { return build_coupling(L1, L2); }

namespace {

// argmin_xi f(xi) + <lin, xi> + 1/2 xi' P xi + const, P symmetric PSD,
// with the strong-convexity anchor already folded into P and lin.
Vec solve_half_step(const ConvexFunction& f, const Mat& P, const Vec& lin) {
  if (const auto& qf = f.quadratic_form()) {
    const Mat K = qf->G + P;
    Eigen::LLT<Mat> llt(K);
    if (llt.info() != Eigen::Success)
      throw InvalidInput("best_response_run: half-step subproblem is not strongly convex");
    return llt.solve(Vec(-qf->g - lin));
  }
  // nonsmooth f: fold the quadratic into a prox with parameter from P's
  // smallest eigenvalue; requires P positive definite
  Eigen::SelfAdjointEigenSolver<Mat> es(P, Eigen::EigenvaluesOnly);
  const double mu = es.eigenvalues().minCoeff();
  if (mu <= 0.0) throw InvalidInput("best_response_run: half-step subproblem is not strongly convex");
  // minimize f(xi) + q(xi) via proximal fixed point x <- prox_f(x - t(Px + lin))
  const double t = 1.0 / es.eigenvalues().maxCoeff();
  Vec x = Vec::Zero(P.cols());
  for (int it = 0; it < 100000; ++it) {
    const Vec grad = P * x + lin;
    const Vec next = prox(f, t, Vec(x - t * grad));
    const double move = (next - x).norm();
    x = next;
    if (move <= 1e-12 * (1.0 + x.norm())) return x;
  }
  throw NumericalError("best_response_run: half-step fixed point did not converge");
}

}  // namespace

BestResponseTrace best_response_run(const Game& game, const Vec& x10, const Vec& x20, int iters) {
  require(iters > 0, "best_response_run: iters must be positive");
  require(x10.size() == game.dim1() && x20.size() == game.dim2(), "best_response_run: start point dimension mismatch");

  const Eigen::Index d1 = game.dim1(), d2 = game.dim2();
  const Mat H11 = game.coupling.topLeftCorner(d1, d1);
  const Mat H12 = game.coupling.topRightCorner(d1, d2);
  const Mat H22 = game.coupling.bottomRightCorner(d2, d2);
  const Mat L1tL1 = game.L1.transpose() * game.L1;
  const Mat L2tL2 = game.L2.transpose() * game.L2;
  const Mat I1 = Mat::Identity(d1, d1);
  const Mat I2 = Mat::Identity(d2, d2);

  BestResponseTrace trace;
  trace.team_solution = limit_solution(game.potential(), game.constraint_coupling());

  const ConvexFunction potential = game.potential();
  auto penalized = [&](const Vec& x1, const Vec& x2, double beta) {
    Vec x(d1 + d2);
    x << x1, x2;
    return eval(potential, x) + 0.5 * beta * (game.L1 * x1 - game.L2 * x2).squaredNorm();
  };
  auto push_state = [&](const Vec& x1, const Vec& x2) {
    trace.x1.push_back(x1);
    trace.x2.push_back(x2);
    Vec x(d1 + d2);
    x << x1, x2;
    trace.nash_gap.push_back((x - trace.team_solution.point).norm());
    trace.constraint_residual.push_back((game.L1 * x1 - game.L2 * x2).norm());
  };

  Vec x1 = x10, x2 = x20;
  push_state(x1, x2);
  for (int k = 0; k < iters; ++k) {
    const double beta = game.beta_seq(k);
    require(beta > 0.0, "best_response_run: beta_k must be positive");
    trace.obj_before.push_back(penalized(x1, x2, beta));

    // player 1 against x2_k
    {
      const Mat P = H11 + beta * L1tL1 + game.alpha * I1;
      const Vec lin = H12 * x2 - beta * game.L1.transpose() * (game.L2 * x2) - game.alpha * x1;
      x1 = solve_half_step(game.f1, P, lin);
    }
    trace.obj_mid.push_back(penalized(x1, x2, beta));

    // player 2 against x1_{k+1}
    {
      const Mat P = H22 + beta * L2tL2 + game.nu * I2;
      const Vec lin = H12.transpose() * x1 - beta * game.L2.transpose() * (game.L1 * x1) - game.nu * x2;
      x2 = solve_half_step(game.f2, P, lin);
    }
    trace.obj_after.push_back(penalized(x1, x2, beta));
    push_state(x1, x2);
  }
  return trace;
}

}  // namespace mscale
