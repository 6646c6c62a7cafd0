#pragma once

#include <functional>
#include <vector>

#include "mscale/common.hpp"

namespace mscale {

// Two-subdomain 1-D Poisson problem on (0,1) with homogeneous Dirichlet ends.
// The grid has n subintervals (mesh 1/n); interior nodes 1..n-1. The unknown
// at the split node is duplicated, one copy per subdomain, and the jump map is
// the difference of the two copies.
struct CoupledProblem {
  Mat K1, K2;     // stiffness blocks, tridiagonal SPD
  Vec h1, h2;     // load vectors
  Mat T1, T2;     // interface trace maps (row selectors)
  Eigen::Index n = 0;
  Eigen::Index split = 0;

  Eigen::Index size1() const { return split; }          // nodes 1..split
  Eigen::Index size2() const { return n - split; }      // nodes split..n-1
  double mesh() const { return 1.0 / static_cast<double>(n); }
};

CoupledProblem dd_assemble(Eigen::Index n, Eigen::Index split, const std::function<double(double)>& source);

// Standard (n-1)-point Laplacian system for the same data.
Mat dd_monolithic_matrix(const CoupledProblem& cp);
Vec dd_monolithic_rhs(const CoupledProblem& cp);
Vec dd_monolithic_solution(const CoupledProblem& cp);

// Coupled system with the jump constraint eliminated (both interface copies
// identified); equals the monolithic system entrywise.
Mat dd_eliminated_matrix(const CoupledProblem& cp);
Vec dd_eliminated_rhs(const CoupledProblem& cp);

struct DdTrace {
  Vec u1, u2;
  std::vector<double> jump;       // |[u]| per iteration
  std::vector<double> sup_error;  // against the monolithic solve, per iteration
  Vec monolithic;
};

// Alternating subdomain solves with Robin-type interface updates carrying the
// memory coefficient alpha, penalty weights beta_seq(k).
DdTrace dd_run(const CoupledProblem& cp, double alpha, const std::function<double(int)>& beta_seq, int iters);

}  // namespace mscale
