#include "mml/speedtrack.hpp"

#include <cmath>

namespace mml {

double mu(double grad_sq_norm, double param_sq_norm_after) {
  if (grad_sq_norm < 0.0 || param_sq_norm_after < 0.0)
    throw Error("mu: squared norms must be nonnegative");
  if (param_sq_norm_after == 0.0)
    throw Error("mu: degenerate group (zero parameter norm)");
  return grad_sq_norm / param_sq_norm_after;
}

void SpeedAccumulator::accumulate(double mu_theta0, double mu_fusion0,
                                  double mu_theta1, double mu_fusion1) {
  m_theta0 += mu_theta0;
  m_fusion0 += mu_fusion0;
  m_theta1 += mu_theta1;
  m_fusion1 += mu_fusion1;
  ++steps;
}

std::pair<double, double> SpeedAccumulator::cond_speed() const {
  if (m_theta0 <= 0.0 || m_fusion0 <= 0.0 || m_theta1 <= 0.0 || m_fusion1 <= 0.0)
    throw Error("SpeedAccumulator: insufficient warm-up (zero accumulated sum)");
  return {std::log(m_fusion0 / m_theta0), std::log(m_fusion1 / m_theta1)};
}

double SpeedAccumulator::diff_speed() const {
  auto [s10, s01] = cond_speed();
  return s10 - s01;
}

MultiDiffSpeed diff_speed_multi(const std::vector<double>& speeds) {
  if (speeds.size() < 2)
    throw Error("diff_speed_multi: need at least two modalities");
  MultiDiffSpeed out;
  for (std::size_t i = 1; i < speeds.size(); ++i) {
    if (speeds[i] > speeds[out.max_index]) out.max_index = i;
    if (speeds[i] < speeds[out.min_index]) out.min_index = i;
  }
  out.value = speeds[out.max_index] - speeds[out.min_index];
  return out;
}

}  // namespace mml
