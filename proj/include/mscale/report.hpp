#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mscale/integrator.hpp"

namespace mscale {

// Diagnostics are tagged by the asymptotic statement they instantiate.
// Requesting a tag whose hypotheses the trajectory does not meet is an error.
enum class TheoremTag {
  Thm2_1_i,    // ergodic convergence of the time average
  Thm2_1_ii,   // distance to equilibria settles (needs probes)
  Thm2_1_iii,  // running integral of beta*psi saturates
  Thm2_2,      // strong convergence under strong monotonicity (needs oracle)
  Thm3_1_i,    // state converges to the hierarchical solution (needs oracle)
  Thm3_1_ii,   // psi(x(t)) -> 0
  Thm3_1_iii,  // distance to equilibria settles (needs probes)
  Thm3_1_iv,   // beta(t) psi(x(t)) -> 0
  Thm4_1,      // epsilon-parameterized minimizing property
  Thm5_1       // convergence without the growth condition (needs oracle)
};

const char* to_string(TheoremTag tag);
std::optional<TheoremTag> parse_theorem_tag(const std::string& name);

struct TagResult {
  TheoremTag tag;
  bool pass = false;
  double measured = 0.0;
};

struct Report {
  ConvergenceReport convergence;
  std::vector<TagResult> tags;
  Vec final_state;
  StepRecord final_record;
  std::vector<std::pair<double, Vec>> refinement_table;  // (h, final state)
};

// Evaluates every requested tag against the trajectory. Pure function of
// (trajectory, oracle); tags with unmet hypotheses raise InvalidInput naming
// the missing hypothesis.
Report summarize(const Trajectory& traj, const std::optional<Vec>& oracle, const std::vector<TheoremTag>& tags);

// Flat key = value block, same grammar as scenario files; byte-deterministic.
std::string serialize_report(const Report& report);

}  // namespace mscale
