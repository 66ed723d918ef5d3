#include "sancdifi/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sancdifi/error.hpp"

namespace sancdifi {

std::string_view to_string(TriggerKind kind) {
  return kind == TriggerKind::BadNetPatch ? "badnet" : "invisible";
}

TriggerKind trigger_kind_from_string(std::string_view name) {
  if (name == "badnet") return TriggerKind::BadNetPatch;
  if (name == "invisible") return TriggerKind::InvisibleImageWide;
  fail(ErrorKind::InvalidArgument, "unknown trigger kind '" + std::string(name) + "'");
}

ImageTensor embed_trigger(const ImageTensor& x, const TriggerSpec& spec) {
  require(x.same_shape(spec.pattern) && spec.template_mask.matches(x),
          ErrorKind::DimensionMismatch, "embed_trigger: image and trigger dims differ");
  require(spec.alpha >= 0.0 && spec.alpha <= 1.0, ErrorKind::InvalidArgument,
          "trigger alpha outside [0, 1]");
  ImageTensor out = x;
  const int channels = x.channels();
  for (int y = 0; y < x.height(); ++y) {
    for (int col = 0; col < x.width(); ++col) {
      if (spec.template_mask.at(y, col)) continue;
      for (int c = 0; c < channels; ++c) {
        const double v = x.at(y, col, c);
        const double p = spec.kind == TriggerKind::BadNetPatch
                             ? spec.pattern.at(y, col, c)
                             : std::clamp(v + spec.pattern.at(y, col, c), 0.0, 1.0);
        out.at(y, col, c) = std::clamp((1.0 - spec.alpha) * v + spec.alpha * p, 0.0, 1.0);
      }
    }
  }
  return out;
}

TriggerSpec make_badnet_trigger(int image_size, int channels, int patch_size, Corner corner,
                                int target_label) {
  require(patch_size >= 1 && patch_size <= image_size, ErrorKind::InvalidArgument,
          "patch of size " + std::to_string(patch_size) + " does not fit a " +
              std::to_string(image_size) + "-pixel image");
  TriggerSpec spec;
  spec.kind = TriggerKind::BadNetPatch;
  spec.alpha = 1.0;
  spec.target_label = target_label;
  spec.patch_size = patch_size;
  const bool bottom = corner == Corner::BottomLeft || corner == Corner::BottomRight;
  const bool right = corner == Corner::TopRight || corner == Corner::BottomRight;
  spec.patch_row = bottom ? image_size - patch_size : 0;
  spec.patch_col = right ? image_size - patch_size : 0;
  spec.pattern = ImageTensor(image_size, image_size, channels, Domain::Unit);
  spec.template_mask = BinaryMask::ones(image_size, image_size);
  for (int dy = 0; dy < patch_size; ++dy) {
    for (int dx = 0; dx < patch_size; ++dx) {
      const int y = spec.patch_row + dy;
      const int x = spec.patch_col + dx;
      spec.template_mask.at(y, x) = 0;
      const double v = (dy + dx) % 2 == 0 ? 1.0 : 0.0;
      for (int c = 0; c < channels; ++c) spec.pattern.at(y, x, c) = v;
    }
  }
  return spec;
}

TriggerSpec make_invisible_trigger(int image_size, int channels, double epsilon_inf,
                                   int target_label, std::uint64_t seed, int tile) {
  require(epsilon_inf >= 0.0 && epsilon_inf <= 0.1, ErrorKind::InvalidArgument,
          "epsilon_inf must lie in [0, 0.1]");
  require(tile >= 0 && tile <= image_size, ErrorKind::InvalidArgument,
          "tile must lie in [0, image_size]");
  TriggerSpec spec;
  spec.kind = TriggerKind::InvisibleImageWide;
  spec.alpha = 1.0;
  spec.target_label = target_label;
  spec.patch_size = 0;
  spec.epsilon_inf = epsilon_inf;
  spec.tile = tile;
  spec.seed = seed;
  spec.template_mask = BinaryMask::zeros(image_size, image_size);
  spec.pattern = ImageTensor(image_size, image_size, channels, Domain::Signed);
  SeededRng rng(derive_seed(seed, Stream::Trigger));
  if (tile == 0) {
    for (auto& v : spec.pattern.values()) v = rng.bernoulli(0.5) ? epsilon_inf : -epsilon_inf;
    return spec;
  }
  // Rejection-sample a tile whose sign count is balanced (off by one when odd).
  const int cells = tile * tile;
  std::vector<int> signs(static_cast<std::size_t>(cells));
  for (;;) {
    int sum = 0;
    for (auto& s : signs) {
      s = rng.bernoulli(0.5) ? 1 : -1;
      sum += s;
    }
    if (std::abs(sum) <= cells % 2) break;
  }
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      const double v = epsilon_inf * signs[static_cast<std::size_t>((y % tile) * tile + x % tile)];
      for (int c = 0; c < channels; ++c) spec.pattern.at(y, x, c) = v;
    }
  }
  return spec;
}

LabeledDataset poison_dataset(const LabeledDataset& data, const TriggerSpec& spec,
                              double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorKind::InvalidArgument,
          "poison fraction outside [0, 1]");
  LabeledDataset out = data;
  const std::size_t n = data.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (count == 0) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SeededRng rng(derive_seed(seed, Stream::Poison));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(order[i], order[j]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = order[i];
    out.images[idx] = embed_trigger(data.images[idx], spec);
    out.labels[idx] = spec.target_label;
  }
  return out;
}

LabeledDataset poison_all(const LabeledDataset& data, const TriggerSpec& spec) {
  LabeledDataset out;
  out.num_classes = data.num_classes;
  out.split = data.split;
  for (std::size_t i : indices_without_label(data, spec.target_label)) {
    out.images.push_back(embed_trigger(data.images[i], spec));
    out.labels.push_back(spec.target_label);
  }
  return out;
}

ImageTensor pgd_attack(const ClassifierInterface& f, const ImageTensor& x, int y,
                       double epsilon_inf, int steps, double step_size) {
  const auto* grad_source = dynamic_cast<const GradientClassifier*>(&f);
  require(grad_source != nullptr, ErrorKind::GradientUnavailable,
          "pgd_attack needs a classifier exposing input gradients");
  require(y >= 0 && y < f.num_classes(), ErrorKind::ClassOutOfRange, "pgd label out of range");
  require(epsilon_inf >= 0.0 && steps >= 0 && step_size >= 0.0, ErrorKind::InvalidArgument,
          "pgd parameters must be nonnegative");
  ImageTensor adv = x;
  for (int s = 0; s < steps; ++s) {
    // Ascent on -log p_y is descent on log p_y.
    const ImageTensor g = grad_source->input_gradient(adv, y);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double sign = g[i] > 0.0 ? -1.0 : (g[i] < 0.0 ? 1.0 : 0.0);
      const double moved = adv[i] + step_size * sign;
      const double projected = std::clamp(moved, x[i] - epsilon_inf, x[i] + epsilon_inf);
      adv[i] = std::clamp(projected, 0.0, 1.0);
    }
  }
  return adv;
}

}  // namespace sancdifi
