#include "sancdifi/pipeline.hpp"

#include <chrono>
#include <string>

#include "json.hpp"
#include "sancdifi/error.hpp"

namespace sancdifi {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

void SancdifiConfig::validate() const {
  require(t1 >= 0 && t2 >= 0, ErrorKind::InvalidArgument, "diffusion depths must be >= 0");
  require(t2 < t1 || (t1 == 0 && t2 == 0), ErrorKind::InvalidArgument,
          "phase-2 depth must be shorter than phase-1 depth (t2=" + std::to_string(t2) +
              ", t1=" + std::to_string(t1) + ")");
  require(t1 <= schedule.steps, ErrorKind::InvalidArgument,
          "t1 exceeds the schedule length " + std::to_string(schedule.steps));
  require(percentile > 0.0 && percentile < 1.0, ErrorKind::InvalidArgument,
          "percentile must lie in (0, 1)");
  require(top_r >= 1, ErrorKind::InvalidArgument, "top_r must be >= 1");
}

std::string SancdifiDiagnostics::to_json(bool include_timings) const {
  nlohmann::ordered_json j;
  j["classes"] = classes;
  j["requested_r"] = requested_r;
  j["effective_r"] = effective_r;
  j["mask_density"] = mask_density;
  j["diffused_pixels"] = diffused_pixels;
  j["phase1_steps"] = phase1_steps;
  j["phase2_steps"] = phase2_steps;
  j["seeds"] = {{"master", seed},
                {"rise", rise_seed},
                {"phase1", phase1_seed},
                {"phase2", phase2_seed}};
  j["warnings"] = warnings;
  if (include_timings) {
    j["timings_ms"] = {{"saliency", saliency_ms}, {"phase1", phase1_ms}, {"phase2", phase2_ms}};
  }
  return j.dump(2);
}

VisibleMask compute_visible_mask(const ImageTensor& x, const ClassifierInterface& f,
                                 const SancdifiConfig& cfg) {
  cfg.validate();
  VisibleMask out;
  const int r = std::min(cfg.top_r, f.num_classes());
  out.r_clipped = r < cfg.top_r;
  out.classes = topk_classes(f, x, r);
  RiseConfig rise = cfg.rise;
  rise.seed = derive_seed(cfg.seed, Stream::RiseMasks);
  out.maps = rise_saliency(f, x, out.classes, rise);
  out.mask = composite_mask(out.maps, cfg.percentile);
  return out;
}

PurifyConfig phase1_config(const SancdifiConfig& cfg) {
  return {cfg.schedule, cfg.t1, derive_seed(cfg.seed, Stream::Phase1), cfg.final_step_noise};
}

PurifyConfig phase2_config(const SancdifiConfig& cfg) {
  return {cfg.schedule, cfg.t2, derive_seed(cfg.seed, Stream::Phase2), cfg.final_step_noise};
}

ImageTensor sancdifi_phases(const ImageTensor& x, const BinaryMask& keep,
                            const NoisePredictorInterface& eps, const SancdifiConfig& cfg) {
  cfg.validate();
  const ImageTensor y1 = purify(x, keep, phase1_config(cfg), eps);
  return purify(y1, keep.complement(), phase2_config(cfg), eps);
}

SancdifiResult sancdifi_purify(const ImageTensor& x, const ClassifierInterface& f,
                               const NoisePredictorInterface& eps, const SancdifiConfig& cfg) {
  cfg.validate();
  SancdifiResult result;
  auto& diag = result.diagnostics;
  diag.seed = cfg.seed;
  diag.requested_r = cfg.top_r;

  auto start = Clock::now();
  VisibleMask visible = compute_visible_mask(x, f, cfg);
  diag.saliency_ms = elapsed_ms(start);
  diag.classes = visible.classes;
  diag.effective_r = static_cast<int>(visible.classes.size());
  if (visible.r_clipped) {
    diag.warnings.push_back("top_r=" + std::to_string(cfg.top_r) + " clipped to class count " +
                            std::to_string(f.num_classes()));
  }
  diag.rise_seed = derive_seed(cfg.seed, Stream::RiseMasks);
  diag.mask_density = visible.mask.density();
  diag.diffused_pixels = visible.mask.count_zeros();

  const PurifyConfig p1 = phase1_config(cfg);
  const PurifyConfig p2 = phase2_config(cfg);
  diag.phase1_steps = p1.t_stop;
  diag.phase2_steps = p2.t_stop;
  diag.phase1_seed = p1.seed;
  diag.phase2_seed = p2.seed;

  start = Clock::now();
  const ImageTensor y1 = purify(x, visible.mask, p1, eps);
  diag.phase1_ms = elapsed_ms(start);
  start = Clock::now();
  result.output = purify(y1, visible.mask.complement(), p2, eps);
  diag.phase2_ms = elapsed_ms(start);

  result.mask = std::move(visible.mask);
  result.saliency = std::move(visible.maps);
  return result;
}

ImageTensor sancdifi_no_second_phase(const ImageTensor& x, const ClassifierInterface& f,
                                     const NoisePredictorInterface& eps,
                                     const SancdifiConfig& cfg) {
  SancdifiConfig one_phase = cfg;
  one_phase.t2 = 0;
  return sancdifi_purify(x, f, eps, one_phase).output;
}

}  // namespace sancdifi
