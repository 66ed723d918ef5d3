#pragma once

#include <cstdint>
#include <functional>

#include "sancdifi/models.hpp"
#include "sancdifi/schedule.hpp"
#include "sancdifi/tensor.hpp"

namespace sancdifi {

struct PurifyConfig {
  DiffusionSchedule schedule;
  int t_stop = 0;  // diffusion depth in steps, 0..T
  std::uint64_t seed = 0;
  bool final_step_noise = false;
};

/// Called with (t, x_t) after the forward jump (t = t_stop) and after every
/// reverse step (t = t_stop - 1 .. 0). Signed domain.
using ChainObserver = std::function<void(int, const ImageTensor&)>;

/// x_t = sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) z, t a schedule index in [0, T).
ImageTensor forward_sample(const ImageTensor& x0, int t, const DiffusionSchedule& schedule,
                           SeededRng& rng);

/// Forward sample everywhere, then pixels with keep = 1 reset to x0. Draws
/// the same noise stream as forward_sample.
ImageTensor masked_forward(const ImageTensor& x0, const BinaryMask& keep, int t,
                           const DiffusionSchedule& schedule, SeededRng& rng);

/// One ancestral step x_t -> x_{t-1} for t in [1, T]:
///   mu = (x_t - beta / sqrt(1 - alpha_bar) * eps(x_t)) / sqrt(1 - beta)
/// with beta, alpha_bar, beta_hat taken at schedule index t - 1. Adds
/// sqrt(beta_hat) z for t > 1; the last step returns mu unless
/// `final_step_noise` is set.
ImageTensor reverse_step(const ImageTensor& x_t, int t, const NoisePredictorInterface& eps,
                         const DiffusionSchedule& schedule, SeededRng& rng,
                         bool final_step_noise = false);

/// reverse_step everywhere, then pixels with keep = 1 set to x_keep.
ImageTensor masked_reverse_step(const ImageTensor& x_t, int t, const BinaryMask& keep,
                                const ImageTensor& x_keep, const NoisePredictorInterface& eps,
                                const DiffusionSchedule& schedule, SeededRng& rng,
                                bool final_step_noise = false);

/// Mask-conditioned purification of a unit-domain image: diffuse to depth
/// cfg.t_stop, run the masked reverse chain to 0 and map back to the unit
/// domain. Kept pixels are returned bit-identical to the input.
ImageTensor purify(const ImageTensor& x, const BinaryMask& keep, const PurifyConfig& cfg,
                   const NoisePredictorInterface& eps, const ChainObserver& observer = {});

/// Unconditioned purification (keep mask all zeros).
ImageTensor diffpure(const ImageTensor& x, const PurifyConfig& cfg,
                     const NoisePredictorInterface& eps, const ChainObserver& observer = {});

}  // namespace sancdifi
