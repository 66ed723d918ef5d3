#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sancdifi/harness.hpp"

namespace sancdifi {

/// Full run configuration: the experiment plus where artifacts go. JSON
/// layout (every key optional, unknown keys rejected):
///   master_seed, output_dir,
///   dataset {image_size, num_classes, channels, per_class_count,
///            validation_per_class, noise_std, background, foreground,
///            glyph_scale},
///   models {classifier {...}, denoiser {...}} with
///          {epochs, batch_size, learning_rate, optimizer: "adam" | "sgd"},
///   attack {badnet {target_label, poison_fraction, patch_size},
///           invisible {target_label, poison_fraction, epsilon_inf, tile},
///           pgd {epsilon, steps, step_size}},
///   sancdifi {t1, t2, percentile, top_r,
///             rise {num_masks, cell_grid, keep_prob, baseline},
///             schedule {steps, beta_start, beta_end}, final_step_noise},
///   experiment {name, attacks [..], defenses [..], ks [..]}.
struct RunConfig {
  ExperimentSpec experiment = default_experiment();
  std::string output_dir;
};

RunConfig default_run_config();

/// Defaults overlaid with the keys present in `j`.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace sancdifi
