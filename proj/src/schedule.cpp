#include "mscale/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "mscale/quadrature.hpp"

namespace mscale {

namespace {
constexpr double kE = 2.718281828459045235360287;
}

// ---------------------------------------------------------------------------
// Schedule

Schedule Schedule::power_law(double a, double p, Direction dir) {
  require(a > 0.0, "schedule: scale must be positive");
  Schedule s;
  s.kind_ = Kind::PowerLaw;
  s.dir_ = dir;
  s.a_ = a;
  s.p_ = p;
  return s;
}

Schedule Schedule::exponential(double a, double r, Direction dir) {
  require(a > 0.0, "schedule: scale must be positive");
  Schedule s;
  s.kind_ = Kind::Exponential;
  s.dir_ = dir;
  s.a_ = a;
  s.p_ = r;
  return s;
}

Schedule Schedule::constant(double a, Direction dir) {
  require(a > 0.0, "schedule: scale must be positive");
  Schedule s;
  s.kind_ = Kind::Constant;
  s.dir_ = dir;
  s.a_ = a;
  return s;
}

Schedule Schedule::logarithmic(double a, Direction dir) {
  require(a > 0.0, "schedule: scale must be positive");
  Schedule s;
  s.kind_ = Kind::Logarithmic;
  s.dir_ = dir;
  s.a_ = a;
  return s;
}

Schedule Schedule::dictionary_epsilon(const Schedule& beta) {
  require(beta.kind() != Kind::DictionaryEpsilon, "dictionary_epsilon: base must be a plain schedule");
  Schedule s;
  s.kind_ = Kind::DictionaryEpsilon;
  s.dir_ = Direction::Epsilon;
  s.base_ = std::make_shared<Schedule>(beta);
  return s;
}

const Schedule& Schedule::base() const {
  require(base_ != nullptr, "schedule: no base schedule");
  return *base_;
}

double Schedule::value(double t) const {
  switch (kind_) {
    case Kind::PowerLaw:
      return a_ * std::pow(1.0 + t, p_);
    case Kind::Exponential:
      return a_ * std::exp(p_ * t);
    case Kind::Constant:
      return a_;
    case Kind::Logarithmic:
      return a_ * std::log(kE + t);
    case Kind::DictionaryEpsilon:
      return 1.0 / base_->value(base_->inverse_cumulative(t));
  }
  return a_;
}

double Schedule::derivative(double t) const {
  switch (kind_) {
    case Kind::PowerLaw:
      return a_ * p_ * std::pow(1.0 + t, p_ - 1.0);
    case Kind::Exponential:
      return a_ * p_ * std::exp(p_ * t);
    case Kind::Constant:
      return 0.0;
    case Kind::Logarithmic:
      return a_ / (kE + t);
    case Kind::DictionaryEpsilon: {
      const double s = base_->inverse_cumulative(t);
      const double b = base_->value(s);
      return -base_->derivative(s) / (b * b * b);
    }
  }
  return 0.0;
}

double Schedule::cumulative(double t) const {
  require(t >= 0.0, "schedule: cumulative needs t >= 0");
  switch (kind_) {
    case Kind::PowerLaw:
      if (std::abs(p_ + 1.0) < 1e-14) return a_ * std::log1p(t);
      return a_ * (std::pow(1.0 + t, p_ + 1.0) - 1.0) / (p_ + 1.0);
    case Kind::Exponential:
      if (std::abs(p_) < 1e-14) return a_ * t;
      return a_ * std::expm1(p_ * t) / p_;
    case Kind::Constant:
      return a_ * t;
    case Kind::Logarithmic:
      return a_ * ((kE + t) * std::log(kE + t) - t - kE);
    case Kind::DictionaryEpsilon:
      // cumulative of eps is the beta-time map itself
      return base_->inverse_cumulative(t);
  }
  return a_ * t;
}

double Schedule::inverse_cumulative(double s) const {
  require(s >= 0.0, "schedule: inverse cumulative needs s >= 0");
  switch (kind_) {
    case Kind::PowerLaw: {
      if (std::abs(p_ + 1.0) < 1e-14) return std::expm1(s / a_);
      const double q = p_ + 1.0;
      if (q < 0.0) {
        const double sat = a_ / (-q);
        require(s < sat, "schedule: time beyond reachable range");
      }
      return std::pow(1.0 + q * s / a_, 1.0 / q) - 1.0;
    }
    case Kind::Exponential: {
      if (std::abs(p_) < 1e-14) return s / a_;
      const double arg = 1.0 + p_ * s / a_;
      require(arg > 0.0, "schedule: time beyond reachable range");
      return std::log(arg) / p_;
    }
    case Kind::Constant:
      return s / a_;
    case Kind::Logarithmic:
      return solve_increasing([this](double t) { return cumulative(t); }, s, 1e-12 * (1.0 + s));
    case Kind::DictionaryEpsilon:
      return base_->cumulative(s);
  }
  return s / a_;
}

// ---------------------------------------------------------------------------
// hypothesis audits

const char* to_string(H1Verdict::Status s) {
  switch (s) {
    case H1Verdict::Status::Finite:
      return "Finite";
    case H1Verdict::Status::Divergent:
      return "Divergent";
    case H1Verdict::Status::Inconclusive:
      return "Inconclusive";
  }
  return "Inconclusive";
}

namespace {

void certify_normal_direction(const ConvexFunction& psi, const Vec& p, const Vec& witness) {
  require(psi.has_argmin_set(), "h1: psi has no argmin-set capability");
  require(psi.has_closed_conjugate() || psi.dim() <= 2, "h1: psi has no conjugate capability");
  if (!normal_cone_contains(psi, witness, p))
    throw InvalidInput("h1: direction p is not certified in the range of the normal cone at the witness point");
}

double conj_gap(const ConvexFunction& psi, const Vec& y) {
  const double cj = conjugate(psi, y);
  if (cj == kInf) return kInf;
  const double sp = support_of_argmin(psi, y);
  if (sp == kInf) return kInf;  // cannot happen when cj is finite (psi* >= sigma_C)
  double d = cj - sp;
  if (d < 0.0) {
    if (d < -1e-12 * (1.0 + std::abs(cj))) throw NumericalError("h1: conjugate dominance violated", d);
    d = 0.0;
  }
  return d;
}

double h1_integrand_uncertified(const ConvexFunction& psi, const Vec& p, const Schedule& beta, double t) {
  const double b = beta.value(t);
  const double d = conj_gap(psi, Vec(p / b));
  return d == kInf ? kInf : b * d;
}

struct TailFit {
  double exponent = 0.0;
  double residual = 0.0;
  bool all_zero = false;
  bool has_inf = false;
};

template <class F>
TailFit fit_tail_exponent(const F& g, double lo, double hi) {
  constexpr int kSamples = 256;
  TailFit out;
  std::vector<double> lt, lg;
  lt.reserve(kSamples);
  lg.reserve(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    const double t = lo + (hi - lo) * (i + 0.5) / kSamples;
    const double v = g(t);
    if (v == kInf || std::isnan(v)) {
      out.has_inf = true;
      return out;
    }
    if (v <= 1e-300) continue;
    lt.push_back(std::log1p(t));
    lg.push_back(std::log(v));
  }
  if (lt.empty()) {
    out.all_zero = true;
    return out;
  }
  const auto n = static_cast<double>(lt.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < lt.size(); ++i) {
    sx += lt[i];
    sy += lg[i];
    sxx += lt[i] * lt[i];
    sxy += lt[i] * lg[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) {
    out.residual = kInf;
    return out;
  }
  out.exponent = (n * sxy - sx * sy) / denom;
  const double icept = (sy - out.exponent * sx) / n;
  double ss = 0;
  for (size_t i = 0; i < lt.size(); ++i) ss += sqr(lg[i] - (icept + out.exponent * lt[i]));
  out.residual = std::sqrt(ss / n);
  return out;
}

// Classification: sharp fits decide by the sign of (exponent + 1), the exact
// convergence boundary for power tails; noisy fits get a +-margin band with
// Inconclusive inside it.
H1Verdict classify_tail(const TailFit& fit, double partial, double horizon) {
  constexpr double kMargin = 0.1;
  constexpr double kSharpResidual = 1e-6;
  H1Verdict v;
  v.partial_integral = partial;
  v.horizon = horizon;
  v.tail_exponent_estimate = fit.exponent;
  v.fit_residual = fit.residual;
  if (fit.has_inf || partial == kInf) {
    v.status = H1Verdict::Status::Divergent;
    v.partial_integral = kInf;
    v.tail_exponent_estimate = kInf;
    return v;
  }
  if (fit.all_zero) {
    v.status = H1Verdict::Status::Finite;
    v.tail_exponent_estimate = -kInf;
    return v;
  }
  if (fit.residual > 0.05) {
    v.status = H1Verdict::Status::Inconclusive;
    return v;
  }
  if (fit.residual <= kSharpResidual) {
    v.status = fit.exponent < -1.0 - 1e-9 ? H1Verdict::Status::Finite : H1Verdict::Status::Divergent;
    return v;
  }
  if (fit.exponent < -1.0 - kMargin)
    v.status = H1Verdict::Status::Finite;
  else if (fit.exponent > -1.0 + kMargin)
    v.status = H1Verdict::Status::Divergent;
  else
    v.status = H1Verdict::Status::Inconclusive;
  return v;
}

}  // namespace

double h1_integrand(const ConvexFunction& psi, const Vec& p, const Vec& witness, const Schedule& beta, double t) {
  require(t >= 0.0, "h1_integrand: t must be nonnegative");
  certify_normal_direction(psi, p, witness);
  return h1_integrand_uncertified(psi, p, beta, t);
}

std::vector<H1Verdict> h1_check(const ConvexFunction& psi, const std::vector<Vec>& ps, const Vec& witness,
                                const Schedule& beta, double horizon, double tail_window) {
  require(tail_window > 0.0 && horizon >= 10.0 * tail_window, "h1_check: requires horizon >= 10 * tail_window > 0");
  std::vector<H1Verdict> out;
  out.reserve(ps.size());
  for (const Vec& p : ps) {
    certify_normal_direction(psi, p, witness);
    auto g = [&](double t) { return h1_integrand_uncertified(psi, p, beta, t); };
    const double partial = integrate(g, 0.0, horizon, 1e-10);
    const TailFit fit = fit_tail_exponent(g, horizon - tail_window, horizon);
    out.push_back(classify_tail(fit, partial, horizon));
  }
  return out;
}

bool h2_check(const std::function<double(double)>& value, const std::function<double(double)>& deriv, double k,
              double t0, double horizon) {
  require(horizon > t0, "h2_check: horizon must exceed t0");
  require(k >= 0.0, "h2_check: k must be nonnegative");
  constexpr int kSamples = 10000;
  for (int i = 0; i <= kSamples; ++i) {
    const double t = t0 + (horizon - t0) * i / kSamples;
    const double d = deriv(t);
    if (d < -1e-12) return false;
    if (d > k * value(t) + 1e-12) return false;
  }
  return true;
}

bool h2_check(const Schedule& beta, double k, double t0, double horizon) {
  return h2_check([&](double t) { return beta.value(t); }, [&](double t) { return beta.derivative(t); }, k, t0,
                  horizon);
}

double h1_eps_integrand(const ConvexFunction& psi, const Vec& p, const Vec& witness, const Schedule& eps, double t) {
  require(t >= 0.0, "h1_eps_integrand: t must be nonnegative");
  certify_normal_direction(psi, p, witness);
  return conj_gap(psi, Vec(eps.value(t) * p));
}

bool h2_eps_check(const Schedule& eps, double k, double horizon) {
  require(horizon > 0.0, "h2_eps_check: horizon must be positive");
  require(k >= 0.0, "h2_eps_check: k must be nonnegative");
  constexpr int kSamples = 10000;
  for (int i = 0; i <= kSamples; ++i) {
    const double t = horizon * i / kSamples;
    const double v = eps.value(t);
    const double d = eps.derivative(t);
    if (d > 1e-12) return false;                 // must be nonincreasing
    if (d < -k * v * v - 1e-12) return false;    // growth floor
  }
  const double window = horizon / 10.0;
  const TailFit fit = fit_tail_exponent([&](double t) { return eps.value(t); }, horizon - window, horizon);
  if (fit.all_zero || fit.has_inf) return false;
  if (fit.residual <= 0.05) {
    // power-like tail: must decay (eps -> 0) but no faster than 1/t
    if (!(fit.exponent < -1e-6)) return false;
    return fit.exponent >= -1.0 - 1e-9;
  }
  // curved tail (exponential-type): decays to zero but integrates finitely
  return false;
}

RescalePoint rescale_to_eps(const Schedule& beta, double t) {
  require(t >= 0.0, "rescale_to_eps: t must be nonnegative");
  if (t == 0.0) return {0.0, 1.0 / beta.value(0.0)};
  auto cumul = [&](double s) { return integrate([&](double u) { return beta.value(u); }, 0.0, s, 1e-12); };
  const double tb = solve_increasing(cumul, t, 1e-10 * (1.0 + t));
  return {tb, 1.0 / beta.value(tb)};
}

}  // namespace mscale
