#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mscale {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Thrown when a caller violates a precondition (bad dimensions, infeasible
// points, unsupported capability requests). Maps to exit code 1 in the CLI.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// Thrown when an inner iteration fails to reach its residual target or a
// factorization breaks down. Carries the last residual seen. Maps to exit
// code 2 in the CLI.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg, double residual = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

// Shortest round-trip decimal representation. Used everywhere a number is
// serialized so that identical inputs give byte-identical outputs.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (x == kInf) return "inf";
  if (x == -kInf) return "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double sqr(double x) { return x * x; }

}  // namespace mscale
