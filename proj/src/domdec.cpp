#include "mscale/domdec.hpp"

#include <algorithm>
#include <cmath>

namespace mscale {

namespace {

// Thomas algorithm for tridiagonal systems; diag/lower/upper are bands.
Vec tridiag_solve(Vec diag, const Vec& lower, const Vec& upper, Vec rhs) {
  const Eigen::Index n = diag.size();
  for (Eigen::Index i = 1; i < n; ++i) {
    const double w = lower[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  Vec x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
  return x;
}

struct Bands {
  Vec diag, lower, upper;
};

Bands extract_bands(const Mat& K) {
  const Eigen::Index n = K.rows();
  Bands b{Vec(n), Vec(n - 1 > 0 ? n - 1 : 0), Vec(n - 1 > 0 ? n - 1 : 0)};
  for (Eigen::Index i = 0; i < n; ++i) b.diag[i] = K(i, i);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    b.lower[i] = K(i + 1, i);
    b.upper[i] = K(i, i + 1);
  }
  return b;
}

}  // namespace

CoupledProblem dd_assemble(Eigen::Index n, Eigen::Index split, const std::function<double(double)>& source) {
  require(n >= 3, "dd_assemble: grid size must be at least 3");
  require(split > 1 && split < n - 1, "dd_assemble: split must be an interior index with 1 < split < n-1");
  require(static_cast<bool>(source), "dd_assemble: source function required");

  CoupledProblem cp;
  cp.n = n;
  cp.split = split;
  const double h = cp.mesh();
  const Eigen::Index n1 = cp.size1();  // nodes 1..split, interface last
  const Eigen::Index n2 = cp.size2();  // nodes split..n-1, interface first

  cp.K1 = Mat::Zero(n1, n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    cp.K1(i, i) = (i + 1 == n1) ? 1.0 / h : 2.0 / h;  // half stencil at the interface
    if (i + 1 < n1) {
      cp.K1(i, i + 1) = -1.0 / h;
      cp.K1(i + 1, i) = -1.0 / h;
    }
  }
  cp.K2 = Mat::Zero(n2, n2);
  for (Eigen::Index i = 0; i < n2; ++i) {
    cp.K2(i, i) = (i == 0) ? 1.0 / h : 2.0 / h;
    if (i + 1 < n2) {
      cp.K2(i, i + 1) = -1.0 / h;
      cp.K2(i + 1, i) = -1.0 / h;
    }
  }

  cp.h1 = Vec(n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const double x = (i + 1) * h;
    cp.h1[i] = (i + 1 == n1 ? 0.5 : 1.0) * h * source(x);
  }
  cp.h2 = Vec(n2);
  for (Eigen::Index i = 0; i < n2; ++i) {
    const double x = (split + i) * h;
    cp.h2[i] = (i == 0 ? 0.5 : 1.0) * h * source(x);
  }

  cp.T1 = Mat::Zero(1, n1);
  cp.T1(0, n1 - 1) = 1.0;
  cp.T2 = Mat::Zero(1, n2);
  cp.T2(0, 0) = 1.0;

  Eigen::LLT<Mat> l1(cp.K1), l2(cp.K2);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success)
    throw NumericalError("dd_assemble: stiffness block is not positive definite");
  return cp;
}

Mat dd_monolithic_matrix(const CoupledProblem& cp) {
  const Eigen::Index m = cp.n - 1;
  const double h = cp.mesh();
  Mat K = Mat::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    K(i, i) = 2.0 / h;
    if (i + 1 < m) {
      K(i, i + 1) = -1.0 / h;
      K(i + 1, i) = -1.0 / h;
    }
  }
  return K;
}

Vec dd_monolithic_rhs(const CoupledProblem& cp) {
  const Eigen::Index m = cp.n - 1;
  Vec f(m);
  // interior nodes 1..split-1 come from block 1, split..n-1 merge both loads
  for (Eigen::Index i = 0; i < cp.split - 1; ++i) f[i] = cp.h1[i];
  f[cp.split - 1] = cp.h1[cp.split - 1] + cp.h2[0];
  for (Eigen::Index i = cp.split; i < m; ++i) f[i] = cp.h2[i - cp.split + 1];
  return f;
}

Vec dd_monolithic_solution(const CoupledProblem& cp) {
  const Mat K = dd_monolithic_matrix(cp);
  const Bands b = extract_bands(K);
  return tridiag_solve(b.diag, b.lower, b.upper, dd_monolithic_rhs(cp));
}

Mat dd_eliminated_matrix(const CoupledProblem& cp) {
  const Eigen::Index m = cp.n - 1;
  const Eigen::Index n1 = cp.size1();
  Mat K = Mat::Zero(m, m);
  K.topLeftCorner(n1, n1) += cp.K1;
  K.bottomRightCorner(m - n1 + 1, m - n1 + 1) += cp.K2;  // interface row overlaps
  return K;
}

Vec dd_eliminated_rhs(const CoupledProblem& cp) { return dd_monolithic_rhs(cp); }

DdTrace dd_run(const CoupledProblem& cp, double alpha, const std::function<double(int)>& beta_seq, int iters) {
  require(alpha >= 0.0, "dd_run: alpha must be nonnegative");
  require(iters > 0, "dd_run: iters must be positive");
  require(static_cast<bool>(beta_seq), "dd_run: beta sequence required");

  const Eigen::Index n1 = cp.size1();
  const Eigen::Index n2 = cp.size2();
  const Bands b1 = extract_bands(cp.K1);
  const Bands b2 = extract_bands(cp.K2);

  DdTrace trace;
  trace.monolithic = dd_monolithic_solution(cp);
  trace.jump.reserve(iters);
  trace.sup_error.reserve(iters);

  Vec u1 = Vec::Zero(n1);
  Vec u2 = Vec::Zero(n2);
  double prev_beta = 0.0;
  for (int k = 0; k < iters; ++k) {
    const double beta = beta_seq(k);
    require(beta > prev_beta, "dd_run: beta_k must be increasing and positive");
    prev_beta = beta;

    // (1+a) K1 u1 + beta T1'T1 u1 = h1 + beta T1' T2 u2 + a K1 u1_prev
    {
      Vec diag = (1.0 + alpha) * b1.diag;
      diag[n1 - 1] += beta;
      Vec rhs = cp.h1 + beta * (cp.T1.transpose() * (cp.T2 * u2)) + alpha * (cp.K1 * u1);
      u1 = tridiag_solve(std::move(diag), Vec((1.0 + alpha) * b1.lower), Vec((1.0 + alpha) * b1.upper),
                         std::move(rhs));
    }
    // (1+a) K2 u2 + beta T2'T2 u2 = h2 + beta T2' T1 u1 + a K2 u2_prev
    {
      Vec diag = (1.0 + alpha) * b2.diag;
      diag[0] += beta;
      Vec rhs = cp.h2 + beta * (cp.T2.transpose() * (cp.T1 * u1)) + alpha * (cp.K2 * u2);
      u2 = tridiag_solve(std::move(diag), Vec((1.0 + alpha) * b2.lower), Vec((1.0 + alpha) * b2.upper),
                         std::move(rhs));
    }

    trace.jump.push_back(std::abs(u1[n1 - 1] - u2[0]));
    double err = 0.0;
    for (Eigen::Index i = 0; i < n1; ++i) err = std::max(err, std::abs(u1[i] - trace.monolithic[i]));
    for (Eigen::Index i = 0; i < n2; ++i) err = std::max(err, std::abs(u2[i] - trace.monolithic[cp.split - 1 + i]));
    trace.sup_error.push_back(err);
  }
  trace.u1 = u1;
  trace.u2 = u2;
  return trace;
}

}  // namespace mscale
