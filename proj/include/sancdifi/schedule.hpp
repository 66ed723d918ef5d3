#pragma once

#include <vector>

namespace sancdifi {

/// Variance schedule for T steps, indexed 0..T-1.
///   alpha_bar[t] = prod_{i<=t} (1 - beta[i])
///   beta_hat[t]  = (1 - alpha_bar[t-1]) / (1 - alpha_bar[t]) * beta[t],  beta_hat[0] = beta[0]
struct DiffusionSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;
  std::vector<double> beta_hat;

  /// Builds the derived arrays from raw betas. Betas of exactly zero are
  /// accepted here (identity diffusion) so degenerate schedules can be tested.
  static DiffusionSchedule from_betas(std::vector<double> betas);
};

/// beta[t] = beta_start + (beta_end - beta_start) * t / (T - 1).
DiffusionSchedule make_linear_schedule(int steps, double beta_start, double beta_end);

}  // namespace sancdifi
