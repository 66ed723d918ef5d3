#include "sancdifi/schedule.hpp"

#include <string>

#include "sancdifi/error.hpp"

namespace sancdifi {

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas) {
  require(!betas.empty(), ErrorKind::InvalidArgument, "schedule needs at least one step");
  DiffusionSchedule s;
  s.steps = static_cast<int>(betas.size());
  s.beta = std::move(betas);
  s.alpha_bar.resize(s.beta.size());
  s.beta_hat.resize(s.beta.size());
  double running = 1.0;
  for (std::size_t t = 0; t < s.beta.size(); ++t) {
    require(s.beta[t] >= 0.0 && s.beta[t] < 1.0, ErrorKind::InvalidArgument,
            "beta must lie in [0, 1)");
    running *= 1.0 - s.beta[t];
    s.alpha_bar[t] = running;
  }
  s.beta_hat[0] = s.beta[0];
  for (std::size_t t = 1; t < s.beta.size(); ++t) {
    const double denom = 1.0 - s.alpha_bar[t];
    s.beta_hat[t] = denom > 0.0 ? (1.0 - s.alpha_bar[t - 1]) / denom * s.beta[t] : 0.0;
  }
  return s;
}

DiffusionSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
  require(steps >= 1, ErrorKind::InvalidArgument, "schedule length must be >= 1");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          ErrorKind::InvalidArgument,
          "need 0 < beta_start <= beta_end < 1, got " + std::to_string(beta_start) + ", " +
              std::to_string(beta_end));
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    betas[t] = steps == 1 ? beta_start
                          : beta_start + (beta_end - beta_start) * t / (steps - 1);
  }
  return DiffusionSchedule::from_betas(std::move(betas));
}

}  // namespace sancdifi
