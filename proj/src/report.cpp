#include "mscale/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mscale {

const char* to_string(TheoremTag tag) {
  switch (tag) {
    case TheoremTag::Thm2_1_i:
      return "thm2.1.i";
    case TheoremTag::Thm2_1_ii:
      return "thm2.1.ii";
    case TheoremTag::Thm2_1_iii:
      return "thm2.1.iii";
    case TheoremTag::Thm2_2:
      return "thm2.2";
    case TheoremTag::Thm3_1_i:
      return "thm3.1.i";
    case TheoremTag::Thm3_1_ii:
      return "thm3.1.ii";
    case TheoremTag::Thm3_1_iii:
      return "thm3.1.iii";
    case TheoremTag::Thm3_1_iv:
      return "thm3.1.iv";
    case TheoremTag::Thm4_1:
      return "thm4.1";
    case TheoremTag::Thm5_1:
      return "thm5.1";
  }
  return "unknown";
}

std::optional<TheoremTag> parse_theorem_tag(const std::string& name) {
  static const std::pair<const char*, TheoremTag> table[] = {
      {"thm2.1.i", TheoremTag::Thm2_1_i},     {"thm2.1.ii", TheoremTag::Thm2_1_ii},
      {"thm2.1.iii", TheoremTag::Thm2_1_iii}, {"thm2.2", TheoremTag::Thm2_2},
      {"thm3.1.i", TheoremTag::Thm3_1_i},     {"thm3.1.ii", TheoremTag::Thm3_1_ii},
      {"thm3.1.iii", TheoremTag::Thm3_1_iii}, {"thm3.1.iv", TheoremTag::Thm3_1_iv},
      {"thm4.1", TheoremTag::Thm4_1},         {"thm5.1", TheoremTag::Thm5_1},
  };
  for (const auto& [k, v] : table)
    if (name == k) return v;
  return std::nullopt;
}

namespace {

// Library defaults for tag pass/fail; the measured value always rides along
// so stricter gates can be applied downstream. The ergodic gate is loose:
// Cesaro means move at O(1/t) even for convergent trajectories.
constexpr double kErgodicDriftTol = 5e-2;
constexpr double kSettleTol = 1e-6;
constexpr double kCumGrowthTol = 0.1;
constexpr double kStrongTol = 1e-4;
constexpr double kOracleTol = 1e-3;
constexpr double kPsiTol = 1e-6;
constexpr double kBetaPsiDecay = 1e-3;

void require_tag(bool cond, TheoremTag tag, const std::string& hypothesis) {
  if (!cond)
    throw InvalidInput(std::string("summarize: tag ") + to_string(tag) + " is inapplicable, unmet hypothesis: " +
                       hypothesis);
}

TagResult eval_tag(TheoremTag tag, const Trajectory& traj, const ConvergenceReport& conv,
                   const std::optional<Vec>& oracle) {
  const ProblemInfo& info = traj.info;
  TagResult out{tag, false, 0.0};
  switch (tag) {
    case TheoremTag::Thm2_1_i: {
      out.measured = conv.ergodic_drift;
      const auto means = ergodic_mean(traj);
      out.pass = out.measured <= kErgodicDriftTol * (1.0 + means.back().norm());
      return out;
    }
    case TheoremTag::Thm2_1_ii:
    case TheoremTag::Thm3_1_iii: {
      if (tag == TheoremTag::Thm3_1_iii) require_tag(info.gradient, tag, "gradient problem (phi present)");
      double peak = 0.0, pos = 0.0;
      for (size_t pi = 0; pi < conv.hz_positive_increments.size(); ++pi) {
        pos = std::max(pos, conv.hz_positive_increments[pi]);
        for (const auto& r : traj.records) peak = std::max(peak, r.hz[pi]);
      }
      out.measured = pos;
      out.pass = pos <= kSettleTol * (1.0 + peak);
      return out;
    }
    case TheoremTag::Thm2_1_iii: {
      const double at_half = traj.records[traj.records.size() / 2].cum_beta_psi;
      const double at_end = conv.final_cum_beta_psi;
      out.measured = at_half > 0.0 ? (at_end - at_half) / at_half : 0.0;
      out.pass = out.measured <= kCumGrowthTol;
      return out;
    }
    case TheoremTag::Thm2_2: {
      require_tag(info.alpha > 0.0, tag, "strong monotonicity modulus alpha > 0");
      require_tag(oracle.has_value(), tag, "equilibrium oracle supplied");
      out.measured = (traj.states.back() - *oracle).norm();
      out.pass = out.measured <= kStrongTol;
      return out;
    }
    case TheoremTag::Thm3_1_i: {
      require_tag(info.gradient, tag, "gradient problem (phi present)");
      require_tag(oracle.has_value(), tag, "hierarchical oracle supplied");
      out.measured = (traj.states.back() - *oracle).norm();
      out.pass = out.measured <= kOracleTol;
      return out;
    }
    case TheoremTag::Thm3_1_ii: {
      require_tag(info.gradient, tag, "gradient problem (phi present)");
      out.measured = traj.records.back().psi_val;
      out.pass = out.measured <= kPsiTol;
      return out;
    }
    case TheoremTag::Thm3_1_iv: {
      require_tag(info.gradient, tag, "gradient problem (phi present)");
      const double initial = traj.records.front().beta_psi;
      out.measured = traj.records.back().beta_psi;
      out.pass = initial > 1e-12 ? out.measured <= kBetaPsiDecay * initial : out.measured <= kPsiTol;
      return out;
    }
    case TheoremTag::Thm4_1: {
      require_tag(info.gradient, tag, "gradient problem (phi present)");
      require_tag(info.parameterization == Parameterization::Epsilon, tag, "epsilon parameterization");
      out.measured = traj.records.back().psi_val;
      out.pass = out.measured <= kPsiTol;
      return out;
    }
    case TheoremTag::Thm5_1: {
      require_tag(info.gradient, tag, "gradient problem (phi present)");
      require_tag(oracle.has_value(), tag, "hierarchical oracle supplied");
      out.measured = (traj.states.back() - *oracle).norm();
      out.pass = out.measured <= kOracleTol;
      return out;
    }
  }
  return out;
}

std::string vec_to_string(const Vec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  s += "]";
  return s;
}

}  // namespace

Report summarize(const Trajectory& traj, const std::optional<Vec>& oracle, const std::vector<TheoremTag>& tags) {
  require(!traj.states.empty(), "summarize: empty trajectory");
  Report rep;
  rep.convergence = convergence_report(traj, oracle);
  rep.final_state = traj.states.back();
  rep.final_record = traj.records.back();
  rep.tags.reserve(tags.size());
  for (TheoremTag tag : tags) rep.tags.push_back(eval_tag(tag, traj, rep.convergence, oracle));
  return rep;
}

std::string serialize_report(const Report& report) {
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("verdict", std::string("\"") + to_string(report.convergence.verdict) + "\"");
  kv("final_state", vec_to_string(report.final_state));
  kv("final_velocity_norm", format_double(report.convergence.final_velocity_norm));
  kv("final_phi", format_double(report.final_record.phi_val));
  kv("final_psi", format_double(report.final_record.psi_val));
  kv("final_beta", format_double(report.final_record.beta_val));
  kv("final_beta_psi", format_double(report.final_record.beta_psi));
  kv("final_e1", format_double(report.final_record.e1));
  kv("final_e2", format_double(report.final_record.e2));
  kv("final_cum_beta_psi", format_double(report.convergence.final_cum_beta_psi));
  kv("peak_cum_beta_psi", format_double(report.convergence.peak_cum_beta_psi));
  kv("state_oscillation", format_double(report.convergence.state_oscillation));
  kv("ergodic_drift", format_double(report.convergence.ergodic_drift));
  for (size_t i = 0; i < report.convergence.hz_tail_slope.size(); ++i) {
    kv("hz_tail_slope_" + std::to_string(i), format_double(report.convergence.hz_tail_slope[i]));
    kv("hz_positive_increments_" + std::to_string(i), format_double(report.convergence.hz_positive_increments[i]));
  }
  if (report.convergence.distance_to_limit)
    kv("distance_to_limit", format_double(*report.convergence.distance_to_limit));
  for (const TagResult& t : report.tags) {
    const std::string base = std::string("tag_") + to_string(t.tag);
    kv(base + "_pass", t.pass ? "true" : "false");
    kv(base + "_value", format_double(t.measured));
  }
  for (size_t i = 0; i < report.refinement_table.size(); ++i) {
    kv("refinement_" + std::to_string(i) + "_h", format_double(report.refinement_table[i].first));
    kv("refinement_" + std::to_string(i) + "_state", vec_to_string(report.refinement_table[i].second));
  }
  return out;
}

}  // namespace mscale
