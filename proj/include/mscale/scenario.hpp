#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mscale/integrator.hpp"
#include "mscale/report.hpp"

namespace mscale {

struct Diagnostic {
  int line = 0;
  std::string message;
};

struct FunctionSpec {
  std::string kind;  // zero | quadratic | abs | indicator_affine | indicator_box |
                     // sqdist_affine | sqdist_box | support_ball | least_squares
  Eigen::Index dim = 0;
  Mat a;       // quadratic matrix or affine/least-squares operator
  Vec b;       // affine right-hand side or quadratic linear term
  Vec lo, hi;  // box bounds
  double r = 0.0;
  double radius = 0.0;

  ConvexFunction build() const;
};

struct OperatorSpec {
  std::string kind;  // affine | rotation2d
  Mat m;
  Vec q;
  double angle = 0.0;

  MonotoneOperator build() const;
};

struct ScheduleSpec {
  std::string kind = "constant";  // power | exp | constant | log
  double a = 1.0;
  double exponent = 0.0;  // power exponent or exponential rate

  Schedule build(Schedule::Direction dir) const;
};

struct Scenario {
  std::string problem_kind = "gradient";    // gradient | monotone
  std::string parameterization = "beta";    // beta | epsilon | epsilon_dictionary
  std::optional<FunctionSpec> phi;
  FunctionSpec psi;
  std::optional<OperatorSpec> op;
  ScheduleSpec schedule;
  double h = 0.01;
  double t_end = 1.0;
  int refinements = 0;
  Vec x0;
  std::vector<Vec> probes;
  std::string oracle_kind = "none";  // none | kkt | point
  Vec oracle_point;
  std::vector<std::string> tags;
  std::string csv_path;
  std::string report_path;

  Schedule build_schedule() const;
  Problem build_problem() const;
  std::vector<TheoremTag> theorem_tags() const;
};

struct ParseOutcome {
  std::optional<Scenario> scenario;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return scenario.has_value() && diagnostics.empty(); }
};

ParseOutcome parse_scenario(const std::string& text);

// Canonical form: fixed section and key order, shortest round-trip numbers.
// parse(serialize(parse(text))) is the identity.
std::string serialize_scenario(const Scenario& s);

// "power 1 2", "exp 1 0.5", "const 2", "log 1"
ScheduleSpec parse_schedule_spec(const std::string& text);

}  // namespace mscale
