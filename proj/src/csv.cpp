#include "mscale/csv.hpp"

#include <fstream>
#include <sstream>

namespace mscale {

std::string trajectory_csv(const Trajectory& traj) {
  require(!traj.states.empty(), "trajectory_csv: empty trajectory");
  const Eigen::Index d = traj.states.front().size();
  const size_t m = traj.records.front().hz.size();

  std::string out;
  out += "t";
  for (Eigen::Index i = 0; i < d; ++i) out += ",x_" + std::to_string(i);
  out += ",phi,psi,beta,beta_psi,e1,e2";
  for (size_t i = 0; i < m; ++i) out += ",hz_" + std::to_string(i);
  for (Eigen::Index i = 0; i < d; ++i) out += ",xmean_" + std::to_string(i);
  out += ",cum_beta_psi,step_norm\n";

  for (size_t k = 0; k < traj.states.size(); ++k) {
    const StepRecord& r = traj.records[k];
    out += format_double(traj.times[k]);
    for (Eigen::Index i = 0; i < d; ++i) out += "," + format_double(traj.states[k][i]);
    out += "," + format_double(r.phi_val);
    out += "," + format_double(r.psi_val);
    out += "," + format_double(r.beta_val);
    out += "," + format_double(r.beta_psi);
    out += "," + format_double(r.e1);
    out += "," + format_double(r.e2);
    for (size_t i = 0; i < m; ++i) out += "," + format_double(r.hz[i]);
    for (Eigen::Index i = 0; i < d; ++i) out += "," + format_double(r.ergodic_mean[i]);
    out += "," + format_double(r.cum_beta_psi);
    out += "," + format_double(r.velocity.norm());
    out += "\n";
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open file for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw NumericalError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace mscale
