#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sancdifi/models.hpp"
#include "sancdifi/tensor.hpp"

namespace sancdifi {

struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> scores;  // H*W, finite, >= 0
  int class_id = 0;
};

struct RiseConfig {
  int num_masks = 2000;
  int cell_grid = 7;
  double keep_prob = 0.5;
  /// Value that masked-out pixels move toward (0 = black).
  double baseline = 0.0;
  std::uint64_t seed = 0;
};

/// Mask i of the RISE family: a cell_grid x cell_grid Bernoulli(keep_prob)
/// grid, bilinearly upsampled to (size + cell) pixels per side, cell =
/// ceil(size / cell_grid), and cropped at a random shift in [0, cell)^2.
/// Odd masks are the antithetic partners of the preceding even mask. Values
/// lie in [0, 1]; mask i depends only on (cfg.seed, i).
std::vector<double> rise_mask(const RiseConfig& cfg, int height, int width, std::size_t i);

std::vector<std::vector<double>> generate_rise_masks(const RiseConfig& cfg, int height, int width);

/// S_k(p) = 1 / (N keep_prob) * sum_i f_k(x masked by M_i) M_i(p) for every
/// k in `classes`. The classifier is queried exactly N times in total,
/// through predict_probs only.
std::vector<SaliencyMap> rise_saliency(const ClassifierInterface& f, const ImageTensor& x,
                                       std::span<const int> classes, const RiseConfig& cfg);

SaliencyMap rise_saliency(const ClassifierInterface& f, const ImageTensor& x, int k,
                          const RiseConfig& cfg);

/// Keeps (1) every pixel whose score is <= tau, where tau is the score of
/// rank n - ceil((1 - d) n) in ascending order (at least rank 1). Ties at tau
/// are kept, so at most ceil((1 - d) n) pixels are zero.
BinaryMask percentile_mask(const SaliencyMap& s, double d);

/// Elementwise product of the per-map percentile masks.
BinaryMask composite_mask(std::span<const SaliencyMap> maps, double d);

/// Indices of the r largest probabilities, descending, ties to the lower index.
std::vector<int> topk_classes(std::span<const double> probs, int r);
std::vector<int> topk_classes(const ClassifierInterface& f, const ImageTensor& x, int r);

}  // namespace sancdifi
