#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sancdifi/attacks.hpp"
#include "sancdifi/datagen.hpp"
#include "sancdifi/models.hpp"
#include "sancdifi/pipeline.hpp"

namespace sancdifi {

// ---------------------------------------------------------------------------
// Defenses

enum class DefenseKind : std::uint8_t { None, Sancdifi, SancdifiNoPhase2, DiffPure };

struct Defense {
  DefenseKind kind = DefenseKind::None;
  int steps = 0;  // t2 for Sancdifi, t_stop for DiffPure, unused otherwise

  static Defense none() { return {DefenseKind::None, 0}; }
  static Defense sancdifi(int t2) { return {DefenseKind::Sancdifi, t2}; }
  static Defense no_phase2() { return {DefenseKind::SancdifiNoPhase2, 0}; }
  static Defense diffpure(int t_stop) { return {DefenseKind::DiffPure, t_stop}; }

  /// CSV-safe label, e.g. "sancdifi_t2_100" or "diffpure_300".
  std::string name() const;
  static Defense parse(const std::string& name);

  friend bool operator==(const Defense&, const Defense&) = default;
};

/// Applies every defense in `defenses` to x. Sancdifi variants share one
/// visible mask and one phase-1 result; DiffPure uses the phase-1 seed so it
/// equals Sancdifi with an all-zero mask. cfg.seed selects all randomness.
/// Each output equals what the corresponding single-defense call returns.
std::vector<ImageTensor> apply_defenses(const ImageTensor& x, std::span<const Defense> defenses,
                                        const ClassifierInterface& f,
                                        const NoisePredictorInterface& eps,
                                        const SancdifiConfig& cfg);

/// Defense as a per-image function; `index` selects the per-image seed.
using DefenseFn = std::function<ImageTensor(const ImageTensor& x, std::size_t index)>;

DefenseFn identity_defense();
DefenseFn make_defense_fn(const Defense& defense, const ClassifierInterface& f,
                          const NoisePredictorInterface& eps, const SancdifiConfig& base,
                          std::uint64_t seed);

/// Per-image defense seed shared by every defense applied to image `index`.
std::uint64_t image_seed(std::uint64_t seed, std::size_t index);

// ---------------------------------------------------------------------------
// Metrics

bool in_top_k(std::span<const double> probs, int label, int k);

/// Percentage of images whose true label is in the top-k of f(defense(x)).
double eval_clean_accuracy(const ClassifierInterface& f, const DefenseFn& defense,
                           const LabeledDataset& data, int k);

/// Percentage of triggered images x (+) r whose top-k under f(defense(.))
/// contains the target. Images whose true label is the target are skipped.
double eval_asr(const ClassifierInterface& f, const DefenseFn& defense,
                const LabeledDataset& data, const TriggerSpec& trigger, int k);

/// Metric ks for a K-class problem: 1 and min(5, K - 1) (top-K is always 100%).
std::vector<int> default_metric_ks(int num_classes);

// ---------------------------------------------------------------------------
// Experiments

enum class AttackKind : std::uint8_t { BadNet, Invisible, Pgd };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::BadNet;
  int target_label = 0;
  double poison_fraction = 0.2;
  // BadNet
  int patch_size = 3;
  // Invisible
  double epsilon_inf = 8.0 / 255.0;
  int tile = 2;
  // PGD
  double pgd_epsilon = 0.05;
  int pgd_steps = 20;
  double pgd_step_size = 0.01;
};

struct ExperimentSpec {
  std::string name = "experiment";
  ShapeDatasetSpec dataset;         // training split; seed derived from master_seed
  int validation_per_class = 25;
  TrainConfig classifier;           // seed derived from master_seed
  TrainConfig denoiser;             // seed derived from master_seed
  std::vector<AttackSpec> attacks;
  std::vector<Defense> defenses;
  std::vector<int> ks;              // empty: default_metric_ks(K)
  SancdifiConfig sancdifi;          // seed derived per image from master_seed
  std::uint64_t master_seed = 0;
  int workers = 1;                  // threads; results do not depend on it, not serialised

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Defaults used by the CLI, the README quickstart and the acceptance suite.
ExperimentSpec default_experiment();

struct MetricsRow {
  std::string experiment;
  std::string attack;
  std::string defense;
  int k = 1;
  double clean_acc_nodef = 0.0;  // percent
  double clean_acc_def = 0.0;    // percent
  double car = 0.0;              // points, clean_acc_nodef - clean_acc_def
  double asr = 0.0;              // percent
  std::size_t n = 0;             // images in the ASR population
  std::uint64_t seed = 0;
};

struct AttackSummary {
  std::string attack;
  double clean_accuracy = 0.0;   // top-1, undefended, fraction
  double attack_success = 0.0;   // top-1, undefended, fraction
  int attempts = 1;
  std::size_t asr_population = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<AttackSummary> attacks;
  nlohmann::ordered_json metadata;  // spec snapshot, derived seeds, definitions

  const MetricsRow& find(const std::string& attack, const std::string& defense, int k) const;
  std::string to_csv() const;
  std::string to_json() const;
};

inline constexpr const char* kMetricsCsvHeader =
    "experiment,attack,defense,k,clean_acc_nodef,clean_acc_def,CAR,ASR,n,seed";

/// Data and models shared by every cell of an experiment.
struct Workbench {
  LabeledDataset train;
  LabeledDataset validation;
  TrainedNoisePredictor denoiser;
  std::uint64_t train_seed = 0;
  std::uint64_t validation_seed = 0;
  std::uint64_t denoiser_seed = 0;
};

/// Dataset spec of one split; the seed is derived from the master seed.
ShapeDatasetSpec split_spec(const ExperimentSpec& spec, Split split);
TrainedNoisePredictor train_denoiser(const ExperimentSpec& spec, const LabeledDataset& train);
Workbench build_workbench(const ExperimentSpec& spec);

/// Weight-init seed of the classifier attacked by `kind`; PGD attacks a clean
/// classifier trained with this seed.
std::uint64_t classifier_seed(std::uint64_t master, AttackKind kind);

/// Trigger for a backdoor attack (BadNet or Invisible) under `master_seed`.
TriggerSpec make_trigger(const AttackSpec& attack, const ShapeDatasetSpec& dataset,
                         std::uint64_t master_seed);

/// Trains (or reuses `bench`) and evaluates every attack x defense x k cell.
/// Trojan classifier for a backdoor attack (quality-checked on `validation`),
/// or a clean classifier for PGD.
TrainedClassifier train_attack_classifier(const ExperimentSpec& spec, const AttackSpec& attack,
                                          const LabeledDataset& train,
                                          const LabeledDataset& validation);

MetricsReport run_experiment(const ExperimentSpec& spec);
MetricsReport run_experiment(const ExperimentSpec& spec, const Workbench& bench);

/// Base defenses replaced by: none, Sancdifi with the base t2 and with
/// t2 = 150, Sancdifi without phase 2, and DiffPure at 10/20/30% of T; every
/// attack runs every defense.
ExperimentSpec ablation_spec(const ExperimentSpec& base);
MetricsReport ablation_suite(const ExperimentSpec& base);

}  // namespace sancdifi
