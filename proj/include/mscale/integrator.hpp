#pragma once

#include <optional>
#include <vector>

#include "mscale/common.hpp"
#include "mscale/convex.hpp"
#include "mscale/schedule.hpp"

namespace mscale {

class MonotoneOperator {
 public:
  enum class Kind { Affine, Rotation2D, Subdifferential };

  // A(x) = Mx + q, requires M + M' positive semidefinite
  static MonotoneOperator affine(Mat M, Vec q);
  // planar rotation; monotone for angles with cos(angle) >= 0
  static MonotoneOperator rotation2d(double angle);
  static MonotoneOperator subdifferential(ConvexFunction f);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  // smallest eigenvalue of the symmetric part for affine operators; reported
  // as zero for rotations
  double strong_monotonicity_modulus() const { return alpha_; }

  Vec apply(const Vec& x) const;  // single-valued kinds only
  const Mat& matrix() const { return M_; }
  const Vec& offset() const { return q_; }
  const ConvexFunction& function() const;
  double angle() const { return angle_; }

 private:
  MonotoneOperator() = default;
  Kind kind_ = Kind::Affine;
  Eigen::Index dim_ = 0;
  double alpha_ = 0.0;
  Mat M_;
  Vec q_;
  double angle_ = 0.0;
  std::optional<ConvexFunction> f_;
};

enum class Parameterization { Beta, Epsilon };

class Problem {
 public:
  static Problem gradient(ConvexFunction phi, ConvexFunction psi, Schedule schedule,
                          Parameterization param = Parameterization::Beta);
  static Problem monotone(MonotoneOperator op, ConvexFunction psi, Schedule schedule);

  bool is_gradient() const { return phi_.has_value(); }
  const ConvexFunction& phi() const;
  const ConvexFunction& psi() const { return *psi_; }
  const MonotoneOperator& op() const;
  const Schedule& schedule() const { return *schedule_; }
  Parameterization parameterization() const { return param_; }
  double strong_monotonicity_modulus() const { return op_ ? op_->strong_monotonicity_modulus() : 0.0; }
  Eigen::Index dim() const { return psi_->dim(); }

 private:
  Problem() = default;
  std::optional<ConvexFunction> phi_;
  std::optional<ConvexFunction> psi_;
  std::optional<MonotoneOperator> op_;
  std::optional<Schedule> schedule_;
  Parameterization param_ = Parameterization::Beta;
};

struct StepRecord {
  double phi_val = 0.0;
  double psi_val = 0.0;
  double beta_val = 0.0;  // 1/eps(t) for epsilon-parameterized runs
  double beta_psi = 0.0;
  double e1 = 0.0;  // phi/beta + psi
  double e2 = 0.0;  // phi + beta*psi
  std::vector<double> hz;
  Vec velocity;
  double xi_eta_residual = 0.0;
  double cum_beta_psi = 0.0;
  Vec ergodic_mean;
};

struct ProblemInfo {
  bool gradient = true;
  Parameterization parameterization = Parameterization::Beta;
  double alpha = 0.0;
  bool has_probes = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<StepRecord> records;
  ProblemInfo info;
};

class RunError : public NumericalError {
 public:
  RunError(const std::string& msg, double residual, Trajectory partial)
      : NumericalError(msg, residual), partial_trajectory(std::move(partial)) {}
  Trajectory partial_trajectory;
};

// Backward-Euler/proximal step of the gradient dynamic:
// argmin_u phi(u) + beta(t_next) psi(u) + |u - x|^2 / (2h)
// (epsilon parameterization: psi(u) + eps(t_next) phi(u) + |u - x|^2 / (2h))
Vec step(const Problem& problem, const Vec& x, double t_next, double h);

// Resolvent step of the monotone dynamic: x+ + h A(x+) + h beta(t_next) eta = x
// with eta in the subdifferential of psi at x+.
Vec step_mami(const Problem& problem, const Vec& x, double t_next, double h);

// Uniform-grid integration with full per-step diagnostics. Gradient problems
// use the proximal backward-Euler step. Monotone problems with affine or
// rotation operators use a stabilized implicit-midpoint composition, which
// keeps non-dissipative orbits (rotations) at constant norm instead of
// spiralling in at rate O(h) per unit time.
Trajectory run(const Problem& problem, const Vec& x0, double t_end, double h, const std::vector<Vec>& probes = {});

// Trapezoid cumulative mean X(t_k) of the states; X(t_0) = x(0).
std::vector<Vec> ergodic_mean(const Trajectory& traj);

struct ConvergenceReport {
  enum class Verdict { Converged, ErgodicOnly, Diverged, Inconclusive };
  Verdict verdict = Verdict::Inconclusive;
  double final_velocity_norm = 0.0;
  double state_oscillation = 0.0;  // tail max |x(t)-x(T)| / (1 + max |x|)
  double ergodic_drift = 0.0;      // |X(T) - X(T/2)|
  bool ergodic_norm_decreasing = false;
  std::vector<double> hz_tail_slope;
  std::vector<double> hz_positive_increments;  // sum of (delta h_z)_+ over last half
  double final_cum_beta_psi = 0.0;
  double peak_cum_beta_psi = 0.0;
  double final_e1 = 0.0;
  double final_e2 = 0.0;
  double final_beta_psi = 0.0;
  std::optional<double> distance_to_limit;
};

const char* to_string(ConvergenceReport::Verdict v);

ConvergenceReport convergence_report(const Trajectory& traj, const std::optional<Vec>& limit = std::nullopt);

}  // namespace mscale
