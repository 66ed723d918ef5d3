#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sancdifi/diffusion.hpp"
#include "sancdifi/models.hpp"
#include "sancdifi/saliency.hpp"
#include "sancdifi/schedule.hpp"
#include "sancdifi/tensor.hpp"

namespace sancdifi {

inline DiffusionSchedule default_schedule() { return make_linear_schedule(1000, 1e-4, 0.02); }

struct SancdifiConfig {
  int t1 = 300;             // phase-1 depth, salient pixels
  int t2 = 100;             // phase-2 depth, complement; t2 < t1 unless both are 0
  double percentile = 0.95; // d
  int top_r = 5;            // clipped to the class count
  RiseConfig rise;          // rise.seed is replaced by a seed derived from `seed`
  DiffusionSchedule schedule = default_schedule();
  std::uint64_t seed = 0;
  bool final_step_noise = false;

  void validate() const;
};

struct SancdifiDiagnostics {
  std::vector<int> classes;
  int requested_r = 0;
  int effective_r = 0;
  double mask_density = 0.0;  // fraction of pixels kept in phase 1
  std::size_t diffused_pixels = 0;
  int phase1_steps = 0;
  int phase2_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t rise_seed = 0;
  std::uint64_t phase1_seed = 0;
  std::uint64_t phase2_seed = 0;
  std::vector<std::string> warnings;
  double saliency_ms = 0.0;
  double phase1_ms = 0.0;
  double phase2_ms = 0.0;

  /// JSON text record. Timings are wall-clock and therefore omitted unless
  /// asked for, so the default output is reproducible byte for byte.
  std::string to_json(bool include_timings = false) const;
};

struct SancdifiResult {
  ImageTensor output;
  BinaryMask mask;  // A: 1 = kept during phase 1
  std::vector<SaliencyMap> saliency;
  SancdifiDiagnostics diagnostics;
};

/// Top-r classes, their RISE maps and the composite keep mask A.
struct VisibleMask {
  std::vector<int> classes;
  std::vector<SaliencyMap> maps;
  BinaryMask mask;
  bool r_clipped = false;
};

VisibleMask compute_visible_mask(const ImageTensor& x, const ClassifierInterface& f,
                                 const SancdifiConfig& cfg);

PurifyConfig phase1_config(const SancdifiConfig& cfg);
PurifyConfig phase2_config(const SancdifiConfig& cfg);

/// Phase 1: purify with A to depth t1. Phase 2: purify the result with I - A
/// to depth t2.
ImageTensor sancdifi_phases(const ImageTensor& x, const BinaryMask& keep,
                            const NoisePredictorInterface& eps, const SancdifiConfig& cfg);

/// Saliency, composite mask and both purification phases.
SancdifiResult sancdifi_purify(const ImageTensor& x, const ClassifierInterface& f,
                               const NoisePredictorInterface& eps, const SancdifiConfig& cfg);

/// Same pipeline with the complement phase skipped (t2 = 0).
ImageTensor sancdifi_no_second_phase(const ImageTensor& x, const ClassifierInterface& f,
                                     const NoisePredictorInterface& eps,
                                     const SancdifiConfig& cfg);

}  // namespace sancdifi
