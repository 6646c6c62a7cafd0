#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mscale/common.hpp"
#include "mscale/convex.hpp"

namespace mscale {

// Parametric time-scaling family with closed-form value, derivative and
// cumulative integral. Beta schedules are meant to grow without bound,
// Epsilon schedules to decay to zero; the audits below test those intents.
class Schedule {
 public:
  enum class Direction { Beta, Epsilon };
  enum class Kind { PowerLaw, Exponential, Constant, Logarithmic, DictionaryEpsilon };

  static Schedule power_law(double a, double p, Direction dir = Direction::Beta);
  static Schedule exponential(double a, double r, Direction dir = Direction::Beta);
  static Schedule constant(double a, Direction dir = Direction::Beta);
  static Schedule logarithmic(double a, Direction dir = Direction::Beta);
  // eps(t) = 1 / beta(t_beta(t)) with  integral_0^{t_beta(t)} beta = t
  static Schedule dictionary_epsilon(const Schedule& beta);

  double value(double t) const;
  double derivative(double t) const;
  double cumulative(double t) const;
  // t with cumulative(t) = s; throws InvalidInput when s is unreachable
  double inverse_cumulative(double s) const;

  Kind kind() const { return kind_; }
  Direction direction() const { return dir_; }
  double param_a() const { return a_; }
  double param_exponent() const { return p_; }
  const Schedule& base() const;

 private:
  Schedule() = default;
  Kind kind_ = Kind::Constant;
  Direction dir_ = Direction::Beta;
  double a_ = 1.0;
  double p_ = 0.0;  // exponent (power) or rate (exponential)
  std::shared_ptr<const Schedule> base_;
};

// Numeric audit of an improper-integral hypothesis: finite horizon quadrature
// plus a log-log tail-exponent fit.
struct H1Verdict {
  enum class Status { Finite, Divergent, Inconclusive };
  Status status = Status::Inconclusive;
  double partial_integral = 0.0;
  double tail_exponent_estimate = 0.0;
  double horizon = 0.0;
  double fit_residual = 0.0;
};

const char* to_string(H1Verdict::Status s);

// beta(t) * [psi*(p / beta(t)) - sigma_C(p / beta(t))], requiring p to be
// certified in the range of the normal cone via the witness point z in C.
double h1_integrand(const ConvexFunction& psi, const Vec& p, const Vec& witness, const Schedule& beta, double t);

std::vector<H1Verdict> h1_check(const ConvexFunction& psi, const std::vector<Vec>& ps, const Vec& witness,
                                const Schedule& beta, double horizon, double tail_window);

// 0 <= beta'(t) <= k beta(t) on a dense grid of [t0, horizon]
bool h2_check(const Schedule& beta, double k, double t0, double horizon);
bool h2_check(const std::function<double(double)>& value, const std::function<double(double)>& deriv, double k,
              double t0, double horizon);

// psi*(eps(t) p) - sigma_C(eps(t) p)
double h1_eps_integrand(const ConvexFunction& psi, const Vec& p, const Vec& witness, const Schedule& eps, double t);

// eps nonincreasing, eps -> 0, integral eps = +inf, and -k eps^2 <= eps'
bool h2_eps_check(const Schedule& eps, double k, double horizon);

struct RescalePoint {
  double t_beta;
  double eps;
};

// Solves integral_0^{t_beta} beta(s) ds = t by bracketing root-find on the
// numeric cumulative; eps = 1 / beta(t_beta).
RescalePoint rescale_to_eps(const Schedule& beta, double t);

}  // namespace mscale
