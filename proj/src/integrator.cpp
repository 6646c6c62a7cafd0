#include "mscale/integrator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace mscale {

namespace {
// Slightly dissipative implicit midpoint for non-gradient monotone runs.
// theta = 1/2 preserves skew orbits exactly in exact arithmetic; the 1e-6
// bias keeps accumulated floating-point drift on the contractive side.
constexpr double kTheta = 0.5 + 1e-6;
constexpr double kSplitTol = 1e-10;
constexpr int kSplitMaxIter = 10000;
}  // namespace

// ---------------------------------------------------------------------------
// MonotoneOperator

MonotoneOperator MonotoneOperator::affine(Mat M, Vec q) {
  require(M.rows() == M.cols(), "monotone affine: M must be square");
  require(M.rows() == q.size(), "monotone affine: q dimension mismatch");
  MonotoneOperator op;
  op.kind_ = Kind::Affine;
  op.dim_ = M.rows();
  const Mat S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double scale = std::max(1.0, std::abs(es.eigenvalues().maxCoeff()));
  require(lo >= -1e-10 * scale, "monotone affine: M + M' must be positive semidefinite");
  op.alpha_ = std::max(0.0, lo);
  op.M_ = std::move(M);
  op.q_ = std::move(q);
  return op;
}

MonotoneOperator MonotoneOperator::rotation2d(double angle) {
  require(std::cos(angle) >= -1e-12, "rotation2d: monotone only for cos(angle) >= 0");
  MonotoneOperator op;
  op.kind_ = Kind::Rotation2D;
  op.dim_ = 2;
  op.alpha_ = 0.0;
  op.angle_ = angle;
  op.M_.resize(2, 2);
  op.M_ << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  op.q_ = Vec::Zero(2);
  return op;
}

MonotoneOperator MonotoneOperator::subdifferential(ConvexFunction f) {
  MonotoneOperator op;
  op.kind_ = Kind::Subdifferential;
  op.dim_ = f.dim();
  op.alpha_ = 0.0;
  op.f_ = std::move(f);
  return op;
}

Vec MonotoneOperator::apply(const Vec& x) const {
  require(kind_ != Kind::Subdifferential, "monotone apply: subdifferential operators are set-valued");
  require(x.size() == dim_, "monotone apply: dimension mismatch");
  return M_ * x + q_;
}

const ConvexFunction& MonotoneOperator::function() const {
  require(f_.has_value(), "monotone operator: not a subdifferential");
  return *f_;
}

// ---------------------------------------------------------------------------
// Problem

namespace {

void check_psi(const ConvexFunction& psi) {
  require(psi.has_argmin_set(), "problem: psi must expose a nonempty argmin set");
  const Vec probe = project_argmin(psi, Vec::Zero(psi.dim()));
  const double at_min = eval(psi, probe);
  require(std::abs(at_min) <= 1e-8, "problem: psi must attain minimum value 0 on its argmin set");
}

}  // namespace

Problem Problem::gradient(ConvexFunction phi, ConvexFunction psi, Schedule schedule, Parameterization param) {
  require(phi.dim() == psi.dim(), "problem: phi/psi dimension mismatch");
  check_psi(psi);
  Problem p;
  p.phi_ = std::move(phi);
  p.psi_ = std::move(psi);
  p.schedule_ = std::move(schedule);
  p.param_ = param;
  return p;
}

Problem Problem::monotone(MonotoneOperator op, ConvexFunction psi, Schedule schedule) {
  require(op.dim() == psi.dim(), "problem: operator/psi dimension mismatch");
  check_psi(psi);
  Problem p;
  p.op_ = std::move(op);
  p.psi_ = std::move(psi);
  p.schedule_ = std::move(schedule);
  p.param_ = Parameterization::Beta;
  return p;
}

const ConvexFunction& Problem::phi() const {
  require(phi_.has_value(), "problem: no phi (monotone variant)");
  return *phi_;
}

const MonotoneOperator& Problem::op() const {
  require(op_.has_value(), "problem: no operator (gradient variant)");
  return *op_;
}

// ---------------------------------------------------------------------------
// steppers

namespace {

struct StepOutcome {
  Vec point;
  double residual = 0.0;
};

// argmin_u a(u) + w * b(u) + |u - x|^2 / (2h), quadratic fast path first
StepOutcome weighted_prox_step(const ConvexFunction& a, const ConvexFunction& b, double w, const Vec& x, double h) {
  const auto& qa = a.quadratic_form();
  const auto& qb = b.quadratic_form();
  if (qa && qb) {
    const Eigen::Index n = x.size();
    const Mat K = Mat::Identity(n, n) / h + qa->G + w * qb->G;
    const Vec rhs = x / h - qa->g - w * qb->g;
    return {Vec(Eigen::LLT<Mat>(K).solve(rhs)), 0.0};
  }
  const ConvexFunction combined = ConvexFunction::sum(a, ConvexFunction::scale(b, w));
  auto pr = prox_detailed(combined, h, x);
  return {pr.point, pr.residual};
}

// resolvent of (u - x)/h + M u + q + w * dpsi(u) via Douglas-Rachford when
// psi has no quadratic form
StepOutcome mami_resolvent(const Mat& M, const Vec& q, const ConvexFunction& psi, double w, const Vec& x, double h) {
  if (const auto& qf = psi.quadratic_form()) {
    const Eigen::Index n = x.size();
    const Mat K = Mat::Identity(n, n) + h * M + (h * w) * qf->G;
    const Vec rhs = x - h * q - (h * w) * qf->g;
    return {Vec(Eigen::PartialPivLU<Mat>(K).solve(rhs)), 0.0};
  }
  const double mu = h;
  const Eigen::Index n = x.size();
  // J_F for F(u) = (u - x)/h + M u + q
  const Mat KF = (1.0 + mu / h) * Mat::Identity(n, n) + mu * M;
  const Eigen::PartialPivLU<Mat> lu(KF);
  auto jf = [&](const Vec& v) -> Vec { return lu.solve(v + (mu / h) * x - mu * q); };
  Vec y = x;
  double res = kInf;
  for (int it = 0; it < kSplitMaxIter; ++it) {
    const Vec u = jf(y);
    const Vec wpt = prox(psi, mu * w, Vec(2.0 * u - y));
    const Vec shift = wpt - u;
    y += shift;
    res = shift.norm();
    if (res <= kSplitTol) return {u, res};
  }
  throw NumericalError("step_mami: inner splitting did not reach residual target", res);
}

double schedule_weight(const Problem& p, double t) { return p.schedule().value(t); }

StepOutcome gradient_step(const Problem& p, const Vec& x, double t_next, double h) {
  if (p.parameterization() == Parameterization::Beta) {
    return weighted_prox_step(p.phi(), p.psi(), schedule_weight(p, t_next), x, h);
  }
  return weighted_prox_step(p.psi(), p.phi(), schedule_weight(p, t_next), x, h);
}

StepOutcome mami_step(const Problem& p, const Vec& x, double t_next, double h) {
  const MonotoneOperator& A = p.op();
  const double w = schedule_weight(p, t_next);
  if (A.kind() == MonotoneOperator::Kind::Subdifferential) {
    return weighted_prox_step(A.function(), p.psi(), w, x, h);
  }
  return mami_resolvent(A.matrix(), A.offset(), p.psi(), w, x, h);
}

// stabilized theta-scheme for affine/rotation operators with quadratic psi
StepOutcome mami_theta_step(const Problem& p, const Vec& x, double t_prev, double h) {
  const MonotoneOperator& A = p.op();
  const auto& qf = p.psi().quadratic_form();
  if (A.kind() == MonotoneOperator::Kind::Subdifferential || !qf) {
    return mami_step(p, x, t_prev + h, h);  // backward Euler fallback
  }
  const double w = schedule_weight(p, t_prev + kTheta * h);
  const Eigen::Index n = x.size();
  const Mat B = A.matrix() + w * qf->G;
  const Vec c = A.offset() + w * qf->g;
  const Mat K = Mat::Identity(n, n) + (h * kTheta) * B;
  const Vec rhs = x - h * (1.0 - kTheta) * (B * x) - h * c;
  return {Vec(Eigen::PartialPivLU<Mat>(K).solve(rhs)), 0.0};
}

}  // namespace

Vec step(const Problem& problem, const Vec& x, double t_next, double h) {
  require(problem.is_gradient(), "step: gradient problems only (use step_mami)");
  require(h > 0.0, "step: h must be positive");
  require(x.size() == problem.dim(), "step: dimension mismatch");
  return gradient_step(problem, x, t_next, h).point;
}

Vec step_mami(const Problem& problem, const Vec& x, double t_next, double h) {
  require(!problem.is_gradient(), "step_mami: monotone problems only");
  require(h > 0.0, "step_mami: h must be positive");
  require(x.size() == problem.dim(), "step_mami: dimension mismatch");
  return mami_step(problem, x, t_next, h).point;
}

// ---------------------------------------------------------------------------
// run

namespace {

StepRecord make_record(const Problem& p, const Vec& x, double t, const std::vector<Vec>& probes) {
  StepRecord r;
  r.psi_val = eval(p.psi(), x);
  r.phi_val = p.is_gradient() ? eval(p.phi(), x) : 0.0;
  const double s = p.schedule().value(t);
  r.beta_val = p.parameterization() == Parameterization::Beta ? s : 1.0 / s;
  r.beta_psi = r.beta_val * r.psi_val;
  r.e1 = r.phi_val / r.beta_val + r.psi_val;
  r.e2 = r.phi_val + r.beta_psi;
  r.hz.reserve(probes.size());
  for (const Vec& z : probes) r.hz.push_back(0.5 * (x - z).squaredNorm());
  r.velocity = Vec::Zero(x.size());
  r.ergodic_mean = x;
  return r;
}

}  // namespace

Trajectory run(const Problem& problem, const Vec& x0, double t_end, double h, const std::vector<Vec>& probes) {
  require(t_end > 0.0, "run: t_end must be positive");
  require(h > 0.0, "run: h must be positive");
  require(x0.size() == problem.dim(), "run: x0 dimension mismatch");
  require(all_finite(x0), "run: x0 must be finite");
  for (const Vec& z : probes) require(z.size() == problem.dim(), "run: probe dimension mismatch");

  const auto steps = static_cast<long>(std::llround(t_end / h));
  require(steps >= 1, "run: t_end must cover at least one step");

  Trajectory traj;
  traj.info.gradient = problem.is_gradient();
  traj.info.parameterization = problem.parameterization();
  traj.info.alpha = problem.strong_monotonicity_modulus();
  traj.info.has_probes = !probes.empty();
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.records.reserve(steps + 1);

  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.records.push_back(make_record(problem, x0, 0.0, probes));

  Vec running_integral = Vec::Zero(x0.size());
  Vec x = x0;
  for (long k = 1; k <= steps; ++k) {
    const double t_prev = (k - 1) * h;
    const double t = k * h;
    StepOutcome out;
    try {
      out = problem.is_gradient() ? gradient_step(problem, x, t, h) : mami_theta_step(problem, x, t_prev, h);
    } catch (const NumericalError& e) {
      throw RunError(std::string("run: step failed at t = ") + format_double(t) + ": " + e.what(), e.residual(),
                     std::move(traj));
    }
    if (!all_finite(out.point)) {
      throw RunError("run: non-finite state at t = " + format_double(t), kInf, std::move(traj));
    }
    StepRecord r = make_record(problem, out.point, t, probes);
    r.velocity = (out.point - x) / h;
    r.xi_eta_residual = out.residual;
    const StepRecord& prev = traj.records.back();
    r.cum_beta_psi = prev.cum_beta_psi + 0.5 * h * (prev.beta_psi + r.beta_psi);
    running_integral += 0.5 * h * (x + out.point);
    r.ergodic_mean = running_integral / t;
    x = out.point;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.records.push_back(std::move(r));
  }
  return traj;
}

std::vector<Vec> ergodic_mean(const Trajectory& traj) {
  require(!traj.states.empty(), "ergodic_mean: empty trajectory");
  std::vector<Vec> out;
  out.reserve(traj.states.size());
  out.push_back(traj.states.front());
  Vec integral = Vec::Zero(traj.states.front().size());
  for (size_t k = 1; k < traj.states.size(); ++k) {
    const double dt = traj.times[k] - traj.times[k - 1];
    integral += 0.5 * dt * (traj.states[k - 1] + traj.states[k]);
    out.push_back(integral / traj.times[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// convergence report

const char* to_string(ConvergenceReport::Verdict v) {
  switch (v) {
    case ConvergenceReport::Verdict::Converged:
      return "converged";
    case ConvergenceReport::Verdict::ErgodicOnly:
      return "ergodic-only";
    case ConvergenceReport::Verdict::Diverged:
      return "diverged";
    case ConvergenceReport::Verdict::Inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

ConvergenceReport convergence_report(const Trajectory& traj, const std::optional<Vec>& limit) {
  require(!traj.states.empty(), "convergence_report: empty trajectory");
  ConvergenceReport rep;
  const size_t n = traj.states.size();
  const size_t half = n / 2;
  const Vec& last = traj.states.back();

  rep.final_velocity_norm = traj.records.back().velocity.norm();
  rep.final_e1 = traj.records.back().e1;
  rep.final_e2 = traj.records.back().e2;
  rep.final_beta_psi = traj.records.back().beta_psi;
  rep.final_cum_beta_psi = traj.records.back().cum_beta_psi;
  rep.peak_cum_beta_psi = rep.final_cum_beta_psi;  // nondecreasing by construction

  double max_norm = 0.0;
  for (const Vec& s : traj.states) max_norm = std::max(max_norm, s.norm());
  double osc = 0.0;
  for (size_t k = half; k < n; ++k) osc = std::max(osc, (traj.states[k] - last).norm());
  rep.state_oscillation = osc / (1.0 + max_norm);

  const size_t nprobes = traj.records.front().hz.size();
  rep.hz_tail_slope.assign(nprobes, 0.0);
  rep.hz_positive_increments.assign(nprobes, 0.0);
  for (size_t pi = 0; pi < nprobes; ++pi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double pos = 0.0;
    const auto m = static_cast<double>(n - half);
    for (size_t k = half; k < n; ++k) {
      sx += traj.times[k];
      sy += traj.records[k].hz[pi];
      sxx += traj.times[k] * traj.times[k];
      sxy += traj.times[k] * traj.records[k].hz[pi];
      if (k > half) pos += std::max(0.0, traj.records[k].hz[pi] - traj.records[k - 1].hz[pi]);
    }
    const double denom = m * sxx - sx * sx;
    rep.hz_tail_slope[pi] = std::abs(denom) > 1e-30 ? (m * sxy - sx * sy) / denom : 0.0;
    rep.hz_positive_increments[pi] = pos;
  }

  const auto means = ergodic_mean(traj);
  rep.ergodic_drift = (means.back() - means[half]).norm();
  rep.ergodic_norm_decreasing = means.back().norm() <= means[half].norm() + 1e-9 * (1.0 + means[half].norm());

  if (limit) rep.distance_to_limit = (last - *limit).norm();

  double peak_hz = 0.0, pos_inc = 0.0;
  for (size_t pi = 0; pi < nprobes; ++pi) {
    pos_inc = std::max(pos_inc, rep.hz_positive_increments[pi]);
    for (size_t k = 0; k < n; ++k) peak_hz = std::max(peak_hz, traj.records[k].hz[pi]);
  }

  const double initial_norm = traj.states.front().norm();
  if (!all_finite(last) || last.norm() > 100.0 * (1.0 + initial_norm)) {
    rep.verdict = ConvergenceReport::Verdict::Diverged;
  } else if (rep.final_velocity_norm <= 1e-6 && (nprobes == 0 || pos_inc <= 1e-6 * (1.0 + peak_hz))) {
    rep.verdict = ConvergenceReport::Verdict::Converged;
  } else if (rep.state_oscillation > 1e-3 && rep.ergodic_norm_decreasing) {
    rep.verdict = ConvergenceReport::Verdict::ErgodicOnly;
  } else {
    rep.verdict = ConvergenceReport::Verdict::Inconclusive;
  }
  return rep;
}

}  // namespace mscale
