#include "sancdifi/diffusion.hpp"

#include <cmath>
#include <string>

#include "sancdifi/error.hpp"

namespace sancdifi {

namespace {

void check_mask(const BinaryMask& keep, const ImageTensor& x) {
  require(keep.matches(x), ErrorKind::DimensionMismatch, "mask and image dims differ");
}

void pin_kept(ImageTensor& out, const BinaryMask& keep, const ImageTensor& source) {
  const int channels = out.channels();
  for (std::size_t p = 0; p < keep.size(); ++p) {
    if (!keep[p]) continue;
    for (int c = 0; c < channels; ++c) out[p * channels + c] = source[p * channels + c];
  }
}

}  // namespace

ImageTensor forward_sample(const ImageTensor& x0, int t, const DiffusionSchedule& schedule,
                           SeededRng& rng) {
  require(t >= 0 && t < schedule.steps, ErrorKind::InvalidArgument,
          "forward_sample: timestep " + std::to_string(t) + " outside [0, " +
              std::to_string(schedule.steps) + ")");
  const double ab = schedule.alpha_bar[t];
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  ImageTensor out = x0;
  for (auto& v : out.values()) v = signal * v + noise * rng.normal();
  return out;
}

ImageTensor masked_forward(const ImageTensor& x0, const BinaryMask& keep, int t,
                           const DiffusionSchedule& schedule, SeededRng& rng) {
  check_mask(keep, x0);
  ImageTensor out = forward_sample(x0, t, schedule, rng);
  pin_kept(out, keep, x0);
  return out;
}

ImageTensor reverse_step(const ImageTensor& x_t, int t, const NoisePredictorInterface& eps,
                         const DiffusionSchedule& schedule, SeededRng& rng,
                         bool final_step_noise) {
  require(t >= 1 && t <= schedule.steps, ErrorKind::InvalidArgument,
          "reverse_step: timestep " + std::to_string(t) + " outside [1, " +
              std::to_string(schedule.steps) + "]");
  const int idx = t - 1;
  const double beta = schedule.beta[idx];
  const double ab = schedule.alpha_bar[idx];
  const ImageTensor e = eps.predict_eps(x_t, idx);
  require(e.same_shape(x_t), ErrorKind::DimensionMismatch, "noise prediction has wrong dims");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
  const double eps_coeff = ab < 1.0 ? beta / std::sqrt(1.0 - ab) : 0.0;
  ImageTensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv_sqrt_alpha * (x_t[i] - eps_coeff * e[i]);
  if (t > 1 || final_step_noise) {
    const double sigma = std::sqrt(schedule.beta_hat[idx]);
    for (auto& v : out.values()) v += sigma * rng.normal();
  }
  return out;
}

ImageTensor masked_reverse_step(const ImageTensor& x_t, int t, const BinaryMask& keep,
                                const ImageTensor& x_keep, const NoisePredictorInterface& eps,
                                const DiffusionSchedule& schedule, SeededRng& rng,
                                bool final_step_noise) {
  check_mask(keep, x_t);
  require(x_keep.same_shape(x_t), ErrorKind::DimensionMismatch, "x_keep dims differ");
  ImageTensor out = reverse_step(x_t, t, eps, schedule, rng, final_step_noise);
  pin_kept(out, keep, x_keep);
  return out;
}

ImageTensor purify(const ImageTensor& x, const BinaryMask& keep, const PurifyConfig& cfg,
                   const NoisePredictorInterface& eps, const ChainObserver& observer) {
  require(x.domain() == Domain::Unit, ErrorKind::InvalidArgument, "purify expects a unit-domain image");
  check_mask(keep, x);
  require(cfg.t_stop >= 0 && cfg.t_stop <= cfg.schedule.steps, ErrorKind::InvalidArgument,
          "t_stop " + std::to_string(cfg.t_stop) + " outside [0, T]");
  if (cfg.t_stop == 0) return x;

  const ImageTensor x0 = convert_domain(x, Domain::Signed);
  SeededRng forward_rng(derive_seed(cfg.seed, Stream::ForwardNoise));
  SeededRng reverse_rng(derive_seed(cfg.seed, Stream::ReverseNoise));
  ImageTensor x_t = masked_forward(x0, keep, cfg.t_stop - 1, cfg.schedule, forward_rng);
  if (observer) observer(cfg.t_stop, x_t);
  for (int t = cfg.t_stop; t >= 1; --t) {
    x_t = masked_reverse_step(x_t, t, keep, x0, eps, cfg.schedule, reverse_rng,
                              cfg.final_step_noise);
    if (observer) observer(t - 1, x_t);
  }
  ImageTensor out = convert_domain(x_t, Domain::Unit);
  pin_kept(out, keep, x);
  return out;
}

ImageTensor diffpure(const ImageTensor& x, const PurifyConfig& cfg,
                     const NoisePredictorInterface& eps, const ChainObserver& observer) {
  return purify(x, BinaryMask::zeros(x.height(), x.width()), cfg, eps, observer);
}

}  // namespace sancdifi
