#pragma once

#include <cstdint>
#include <string_view>

#include "sancdifi/datagen.hpp"
#include "sancdifi/models.hpp"
#include "sancdifi/tensor.hpp"

namespace sancdifi {

enum class TriggerKind : std::uint8_t { BadNetPatch = 0, InvisibleImageWide = 1 };

std::string_view to_string(TriggerKind kind);
TriggerKind trigger_kind_from_string(std::string_view name);

/// Trigger r applied as
///   x (+) r = (1 - m) * ((1 - alpha) x + alpha p(x)) + m * x,   clamped to [0, 1].
/// For the patch trigger p is a fixed image. For the image-wide trigger p(x)
/// is clamp(x + delta) with a fixed +-epsilon field delta.
struct TriggerSpec {
  TriggerKind kind = TriggerKind::BadNetPatch;
  ImageTensor pattern;      // p (patch) or delta (image-wide, signed-valued)
  BinaryMask template_mask; // 1 = pixel kept clean
  double alpha = 1.0;
  int target_label = 0;

  // Construction parameters, kept for serialisation.
  int patch_size = 3;
  int patch_row = 0;
  int patch_col = 0;
  double epsilon_inf = 0.0;
  int tile = 0;
  std::uint64_t seed = 0;
};

enum class Corner : std::uint8_t { TopLeft, TopRight, BottomLeft, BottomRight };

ImageTensor embed_trigger(const ImageTensor& x, const TriggerSpec& spec);

/// 0/1 checkerboard patch with alpha = 1, placed in `corner`.
TriggerSpec make_badnet_trigger(int image_size, int channels, int patch_size, Corner corner,
                                int target_label);

/// +-epsilon_inf sign field with image-wide support, input invariant. The
/// signs form a seeded, sign-balanced tile x tile block repeated over the
/// image (shared by all channels); tile = 0 draws every pixel independently.
TriggerSpec make_invisible_trigger(int image_size, int channels, double epsilon_inf,
                                   int target_label, std::uint64_t seed, int tile = 2);

/// Replaces round(fraction * n) images, chosen by a seeded shuffle, with
/// their triggered versions and relabels them to the target.
LabeledDataset poison_dataset(const LabeledDataset& data, const TriggerSpec& spec,
                              double fraction, std::uint64_t seed);

/// Triggers every image whose clean label differs from the target (for
/// attack-success evaluation sets).
LabeledDataset poison_all(const LabeledDataset& data, const TriggerSpec& spec);

/// L-infinity PGD ascent on the cross-entropy of the true label y, starting
/// from x. Needs a classifier exposing input gradients.
ImageTensor pgd_attack(const ClassifierInterface& f, const ImageTensor& x, int y,
                       double epsilon_inf, int steps, double step_size);

}  // namespace sancdifi
