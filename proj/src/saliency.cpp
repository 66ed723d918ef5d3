#include "sancdifi/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sancdifi/error.hpp"

namespace sancdifi {

namespace {

void check_rise_config(const RiseConfig& cfg) {
  require(cfg.num_masks >= 1, ErrorKind::InvalidArgument, "RISE needs at least one mask");
  require(cfg.cell_grid >= 2, ErrorKind::InvalidArgument, "RISE cell_grid must be >= 2");
  require(cfg.keep_prob >= 0.0 && cfg.keep_prob <= 1.0, ErrorKind::InvalidArgument,
          "RISE keep_prob outside [0, 1]");
}

// Bilinear sample of a grid x grid array at continuous (gy, gx), edge-clamped.
double bilinear(const std::vector<double>& grid, int n, double gy, double gx) {
  gy = std::clamp(gy, 0.0, n - 1.0);
  gx = std::clamp(gx, 0.0, n - 1.0);
  const int y0 = std::min(static_cast<int>(gy), n - 1);
  const int x0 = std::min(static_cast<int>(gx), n - 1);
  const int y1 = std::min(y0 + 1, n - 1);
  const int x1 = std::min(x0 + 1, n - 1);
  const double fy = gy - y0, fx = gx - x0;
  const double top = grid[y0 * n + x0] * (1 - fx) + grid[y0 * n + x1] * fx;
  const double bottom = grid[y1 * n + x0] * (1 - fx) + grid[y1 * n + x1] * fx;
  return top * (1 - fy) + bottom * fy;
}

}  // namespace

std::vector<double> rise_mask(const RiseConfig& cfg, int height, int width, std::size_t i) {
  check_rise_config(cfg);
  const int n = cfg.cell_grid;
  // Masks come in antithetic pairs: mask 2j + 1 reuses the cell uniforms u
  // and the shift of mask 2j but thresholds 1 - u. Each mask is still an
  // i.i.d. Bernoulli(keep_prob) grid; the pair sums to 1 at keep_prob = 0.5.
  SeededRng rng(derive_seed(cfg.seed, Stream::RiseMasks, i / 2));
  const bool mirrored = i % 2 == 1;
  std::vector<double> grid(static_cast<std::size_t>(n) * n);
  for (auto& g : grid) {
    const double u = rng.uniform();
    g = (mirrored ? 1.0 - u : u) < cfg.keep_prob ? 1.0 : 0.0;
  }

  const int cell_h = (height + n - 1) / n;
  const int cell_w = (width + n - 1) / n;
  const int up_h = height + cell_h;
  const int up_w = width + cell_w;
  const int shift_y = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell_h)));
  const int shift_x = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell_w)));
  const double scale_y = static_cast<double>(n) / up_h;
  const double scale_x = static_cast<double>(n) / up_w;

  std::vector<double> mask(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const double gy = (y + shift_y + 0.5) * scale_y - 0.5;
    for (int x = 0; x < width; ++x) {
      const double gx = (x + shift_x + 0.5) * scale_x - 0.5;
      mask[static_cast<std::size_t>(y) * width + x] = bilinear(grid, n, gy, gx);
    }
  }
  return mask;
}

std::vector<std::vector<double>> generate_rise_masks(const RiseConfig& cfg, int height,
                                                     int width) {
  check_rise_config(cfg);
  std::vector<std::vector<double>> masks;
  masks.reserve(static_cast<std::size_t>(cfg.num_masks));
  for (int i = 0; i < cfg.num_masks; ++i) masks.push_back(rise_mask(cfg, height, width, i));
  return masks;
}

std::vector<SaliencyMap> rise_saliency(const ClassifierInterface& f, const ImageTensor& x,
                                       std::span<const int> classes, const RiseConfig& cfg) {
  check_rise_config(cfg);
  require(cfg.keep_prob > 0.0, ErrorKind::InvalidArgument, "RISE keep_prob must be positive");
  const int K = f.num_classes();
  for (int k : classes) {
    require(k >= 0 && k < K, ErrorKind::ClassOutOfRange,
            "saliency class " + std::to_string(k) + " out of range");
  }
  const int h = x.height(), w = x.width(), channels = x.channels();
  const std::size_t n = static_cast<std::size_t>(h) * w;

  std::vector<SaliencyMap> maps;
  for (int k : classes) maps.push_back({h, w, std::vector<double>(n, 0.0), k});

  ImageTensor query = x;
  for (int i = 0; i < cfg.num_masks; ++i) {
    const auto mask = rise_mask(cfg, h, w, static_cast<std::size_t>(i));
    for (std::size_t p = 0; p < n; ++p) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t idx = p * channels + c;
        query[idx] = x[idx] * mask[p] + cfg.baseline * (1.0 - mask[p]);
      }
    }
    const auto probs = f.predict_probs(query);
    for (auto& m : maps) {
      const double score = probs[m.class_id];
      for (std::size_t p = 0; p < n; ++p) m.scores[p] += score * mask[p];
    }
  }
  const double norm = 1.0 / (cfg.num_masks * cfg.keep_prob);
  for (auto& m : maps) {
    for (auto& v : m.scores) v *= norm;
  }
  return maps;
}

SaliencyMap rise_saliency(const ClassifierInterface& f, const ImageTensor& x, int k,
                          const RiseConfig& cfg) {
  const int classes[] = {k};
  return rise_saliency(f, x, classes, cfg).front();
}

BinaryMask percentile_mask(const SaliencyMap& s, double d) {
  require(d > 0.0 && d < 1.0, ErrorKind::InvalidArgument, "percentile d must lie in (0, 1)");
  const std::size_t n = s.scores.size();
  require(n == static_cast<std::size_t>(s.height) * s.width && n > 0,
          ErrorKind::DimensionMismatch, "saliency map size mismatch");
  // Guard against 0.7 * 10 style rounding pushing an exact integer up.
  const auto diffused = static_cast<std::size_t>(std::ceil((1.0 - d) * n - 1e-9));
  const std::size_t rank = std::max<std::size_t>(1, n - std::min(diffused, n));
  std::vector<double> sorted = s.scores;
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
  const double tau = sorted[rank - 1];
  BinaryMask mask(s.height, s.width);
  for (std::size_t p = 0; p < n; ++p) mask[p] = s.scores[p] <= tau ? 1 : 0;
  return mask;
}

BinaryMask composite_mask(std::span<const SaliencyMap> maps, double d) {
  require(!maps.empty(), ErrorKind::InvalidArgument, "composite mask needs at least one map");
  BinaryMask out = percentile_mask(maps.front(), d);
  for (std::size_t i = 1; i < maps.size(); ++i) {
    require(maps[i].height == out.height() && maps[i].width == out.width(),
            ErrorKind::DimensionMismatch, "saliency maps differ in dims");
    const BinaryMask m = percentile_mask(maps[i], d);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = out[p] & m[p];
  }
  return out;
}

std::vector<int> topk_classes(std::span<const double> probs, int r) {
  require(r >= 1, ErrorKind::InvalidArgument, "top-k needs r >= 1");
  require(static_cast<std::size_t>(r) <= probs.size(), ErrorKind::InvalidArgument,
          "top-k r=" + std::to_string(r) + " exceeds class count " +
              std::to_string(probs.size()));
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  order.resize(static_cast<std::size_t>(r));
  return order;
}

std::vector<int> topk_classes(const ClassifierInterface& f, const ImageTensor& x, int r) {
  const auto probs = f.predict_probs(x);
  return topk_classes(probs, r);
}

}  // namespace sancdifi
