#pragma once

#include <string>

#include "mscale/integrator.hpp"

namespace mscale {

// Fixed schema:
//   t,x_0..x_{d-1},phi,psi,beta,beta_psi,e1,e2,hz_0..hz_{m-1},
//   xmean_0..xmean_{d-1},cum_beta_psi,step_norm
// Values in shortest round-trip decimal; rows strictly increasing in t.
std::string trajectory_csv(const Trajectory& traj);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace mscale
