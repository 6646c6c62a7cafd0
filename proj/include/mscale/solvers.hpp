#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mscale/convex.hpp"

namespace mscale {

struct LimitSolution {
  Vec point;
  Vec multiplier;                 // affine-route KKT multiplier (empty otherwise)
  bool min_norm_selected = false; // set when the solution set is not a singleton
  double stationarity_residual = 0.0;
  double feasibility_residual = 0.0;
};

// Solves min { phi(x) : x in argmin psi }. Quadratic phi over an affine
// argmin set goes through one dense KKT factorization; box sets and nonsmooth
// phi use penalty continuation with proximal fixed-point iterations.
LimitSolution limit_solution(const ConvexFunction& phi, const ConvexFunction& psi);

// Penalty-continuation route (beta = 1e2 .. 1e8 with proximal fixed points),
// usable on any argmin-set geometry; cross-validates the KKT route.
LimitSolution limit_solution_penalty(const ConvexFunction& phi, const ConvexFunction& psi);

// Two-player team game with quadratic coupling and costs to change.
struct Game {
  ConvexFunction f1, f2;
  Mat coupling;  // symmetric Hessian of the joint payoff on the product space
  Mat L1, L2;    // resource maps into the shared space
  double alpha = 1.0;
  double nu = 1.0;
  std::function<double(int)> beta_seq;  // k = 0, 1, 2, ...

  static Game make(ConvexFunction f1, ConvexFunction f2, Mat coupling, Mat L1, Mat L2, double alpha, double nu,
                   std::function<double(int)> beta_seq = {});
  Eigen::Index dim1() const { return f1.dim(); }
  Eigen::Index dim2() const { return f2.dim(); }

  // joint potential f1 + f2 + phi as one convex function on the product space
  ConvexFunction potential() const;
  ConvexFunction constraint_coupling() const;  // 1/2 |L1 x1 - L2 x2|^2
};

struct BestResponseTrace {
  std::vector<Vec> x1, x2;                  // iterates, index 0 = start
  std::vector<double> nash_gap;             // per iteration, against the team KKT solution
  std::vector<double> constraint_residual;  // |L1 x1 - L2 x2|
  // penalized objective f1+f2+phi+(beta_k/2)|L1x1-L2x2|^2 sampled before the
  // first half-step, between the half-steps, and after the second
  std::vector<double> obj_before, obj_mid, obj_after;
  LimitSolution team_solution;
};

BestResponseTrace best_response_run(const Game& game, const Vec& x10, const Vec& x20, int iters);

}  // namespace mscale
