// Command-line front end. Every subcommand loads inputs, calls the library and
// writes artifacts; no numerics live here.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sancdifi/attacks.hpp"
#include "sancdifi/config.hpp"
#include "sancdifi/datagen.hpp"
#include "sancdifi/error.hpp"
#include "sancdifi/harness.hpp"
#include "sancdifi/io.hpp"
#include "sancdifi/models.hpp"
#include "sancdifi/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace sancdifi;

namespace {

// Exit codes, one per failure class.
enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kFormat = 5,
  kInvalid = 6,
  kTraining = 7,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kConfig;
    case ErrorKind::Io: return kIo;
    case ErrorKind::BadMagic:
    case ErrorKind::BadVersion:
    case ErrorKind::Truncated: return kFormat;
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ClassOutOfRange:
    case ErrorKind::GradientUnavailable: return kInvalid;
    case ErrorKind::TrainingDiverged:
    case ErrorKind::TrojanQuality: return kTraining;
  }
  return kInternal;
}

std::string one_line(std::string text) {
  std::string out;
  for (char c : text) {
    if (c == '\n' || c == '\r') {
      out += ' ';
    } else if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else {
      out += c;
    }
  }
  return out;
}

int report_error(std::string_view kind, const std::string& message, int code) {
  std::cerr << "error: kind=" << kind << " message=\"" << one_line(message) << "\"\n";
  return code;
}

// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

RunConfig load(const Common& common) {
  RunConfig cfg = common.config_path.empty() ? default_run_config()
                                             : load_run_config(common.config_path);
  if (common.seed) cfg.experiment.master_seed = *common.seed;
  if (!common.output_dir.empty()) cfg.output_dir = common.output_dir;
  require(common.workers >= 1, ErrorKind::InvalidArgument, "--workers must be at least 1");
  cfg.experiment.workers = common.workers;
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  require(!cfg.output_dir.empty(), ErrorKind::InvalidArgument,
          "--output-dir is required for this command");
  fs::create_directories(cfg.output_dir);
  return cfg.output_dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

ordered_json run_header(const RunConfig& cfg, const std::string& command) {
  return {{"command", command}, {"master_seed", cfg.experiment.master_seed}};
}

AttackSpec attack_spec(const RunConfig& cfg, const std::string& name) {
  const AttackKind kind = attack_kind_from_string(name);
  for (const auto& a : cfg.experiment.attacks) {
    if (a.kind == kind) return a;
  }
  // Attacks left out of experiment.attacks still run with default parameters.
  for (const auto& a : default_experiment().attacks) {
    if (a.kind == kind) return a;
  }
  fail(ErrorKind::InvalidArgument, "unknown attack '" + name + "'");
}

ordered_json trigger_json(const TriggerSpec& t) {
  ordered_json j;
  j["kind"] = std::string(to_string(t.kind));
  j["target_label"] = t.target_label;
  j["alpha"] = t.alpha;
  if (t.kind == TriggerKind::BadNetPatch) {
    j["patch_size"] = t.patch_size;
    j["patch_row"] = t.patch_row;
    j["patch_col"] = t.patch_col;
  } else {
    j["epsilon_inf"] = t.epsilon_inf;
    j["tile"] = t.tile;
    j["seed"] = t.seed;
  }
  return j;
}

ordered_json losses_json(const std::vector<double>& trace) {
  ordered_json j = ordered_json::array();
  for (double v : trace) j.push_back(v);
  return j;
}

// Montage manifest: one tile per line, "name path".
void write_montage(const fs::path& dir,
                   const std::vector<std::pair<std::string, std::string>>& tiles) {
  std::string text = "# montage: name file (left to right)\n";
  for (const auto& [name, file] : tiles) text += name + " " + file + "\n";
  write_text(dir / "montage.txt", text);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_defaults(const Common& common) {
  RunConfig cfg = load(common);
  std::cout << to_json(cfg).dump(2) << "\n";
  return kOk;
}

int cmd_gen_data(const Common& common, int samples) {
  const RunConfig cfg = load(common);
  const fs::path dir = output_dir(cfg);
  const ExperimentSpec& spec = cfg.experiment;
  const ShapeDatasetSpec train_spec = split_spec(spec, Split::Train);
  const ShapeDatasetSpec val_spec = split_spec(spec, Split::Validation);
  const LabeledDataset train = generate_shape_dataset(train_spec);
  const LabeledDataset val = generate_shape_dataset(val_spec);
  write_dataset(dir / "train.snds", train);
  write_dataset(dir / "validation.snds", val);

  // The first `samples` validation images as standalone tensors and tiles.
  std::vector<std::pair<std::string, std::string>> tiles;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(samples), val.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string stem = "samples/val_" + std::to_string(i);
    write_tensor_file(dir / (stem + ".snc"), val.images[i]);
    write_pnm(dir / (stem + ".pgm"), val.images[i]);
    tiles.emplace_back("val_" + std::to_string(i) + "_label_" + std::to_string(val.labels[i]),
                       stem + ".pgm");
  }
  if (!tiles.empty()) write_montage(dir, tiles);

  ordered_json meta = run_header(cfg, "gen-data");
  meta["train"] = {{"file", "train.snds"}, {"count", train.size()}, {"seed", train_spec.seed}};
  meta["validation"] = {{"file", "validation.snds"}, {"count", val.size()}, {"seed", val_spec.seed}};
  meta["dataset"] = to_json(cfg)["dataset"];
  write_json(dir / "data.json", meta);
  return kOk;
}

int cmd_train_classifier(const Common& common, const std::string& command,
                         const std::string& attack_name, const std::string& data_path,
                         const std::string& validation_path) {
  const RunConfig cfg = load(common);
  const fs::path dir = output_dir(cfg);
  const LabeledDataset train = read_dataset(data_path);
  const LabeledDataset val = read_dataset(validation_path);
  const AttackSpec attack = attack_spec(cfg, attack_name);
  const TrainedClassifier trained = train_attack_classifier(cfg.experiment, attack, train, val);

  ordered_json meta = run_header(cfg, command);
  meta["seed"] = classifier_seed(cfg.experiment.master_seed, attack.kind);
  meta["attempts"] = trained.attempts;
  meta["clean_accuracy"] = trained.clean_accuracy;
  meta["loss_trace"] = losses_json(trained.loss_trace);
  if (attack.kind == AttackKind::Pgd) {
    write_classifier(dir / "classifier.snmw", trained.model);
    meta["weights"] = "classifier.snmw";
  } else {
    const TriggerSpec trigger =
        make_trigger(attack, cfg.experiment.dataset, cfg.experiment.master_seed);
    write_classifier(dir / "trojan.snmw", trained.model);
    write_pnm(dir / "trigger_pattern.pgm", trigger.pattern);
    write_json(dir / "trigger.json", trigger_json(trigger));
    meta["weights"] = "trojan.snmw";
    meta["attack"] = to_string(attack.kind);
    meta["attack_success"] = trained.attack_success;
    meta["trigger"] = trigger_json(trigger);
  }
  write_json(dir / (command + ".json"), meta);
  return kOk;
}

int cmd_train_denoiser(const Common& common, const std::string& data_path) {
  const RunConfig cfg = load(common);
  const fs::path dir = output_dir(cfg);
  const LabeledDataset train = read_dataset(data_path);
  const TrainedNoisePredictor trained = train_denoiser(cfg.experiment, train);
  write_noise_predictor(dir / "denoiser.snmw", trained.model);

  ordered_json meta = run_header(cfg, "train-denoiser");
  meta["seed"] = derive_seed(cfg.experiment.master_seed, Stream::WeightInit, 1);
  meta["initial_loss"] = trained.initial_loss;
  meta["final_loss"] = trained.final_loss;
  meta["loss_trace"] = losses_json(trained.loss_trace);
  meta["weights"] = "denoiser.snmw";
  write_json(dir / "train-denoiser.json", meta);
  return kOk;
}

struct AttackArgs {
  std::string attack;
  std::string input;
  std::string data;
  std::string classifier;
  int label = -1;
};

int cmd_attack(const Common& common, const AttackArgs& args) {
  const RunConfig cfg = load(common);
  const fs::path dir = output_dir(cfg);
  require(args.input.empty() != args.data.empty(), ErrorKind::InvalidArgument,
          "give exactly one of --input and --data");
  const AttackSpec attack = attack_spec(cfg, args.attack);
  const bool pgd = attack.kind == AttackKind::Pgd;

  std::optional<ToyClassifier> f;
  std::optional<TriggerSpec> trigger;
  if (pgd) {
    require(!args.classifier.empty(), ErrorKind::InvalidArgument, "pgd needs --classifier");
    f = read_classifier(args.classifier);
  } else {
    trigger = make_trigger(attack, cfg.experiment.dataset, cfg.experiment.master_seed);
  }
  auto apply = [&](const ImageTensor& x, int label) {
    if (!pgd) return embed_trigger(x, *trigger);
    return pgd_attack(*f, x, label, attack.pgd_epsilon, attack.pgd_steps, attack.pgd_step_size);
  };

  ordered_json meta = run_header(cfg, "attack");
  meta["attack"] = to_string(attack.kind);
  if (trigger) meta["trigger"] = trigger_json(*trigger);
  if (!args.input.empty()) {
    require(!pgd || args.label >= 0, ErrorKind::InvalidArgument, "pgd on --input needs --label");
    const ImageTensor x = read_tensor_file(args.input);
    const ImageTensor y = apply(x, args.label);
    write_tensor_file(dir / "attacked.snc", y);
    write_pnm(dir / "attacked.pgm", y);
    meta["output"] = "attacked.snc";
    if (f) meta["predicted_label"] = argmax(f->predict_probs(y));
  } else {
    const LabeledDataset data = read_dataset(args.data);
    LabeledDataset out;
    if (pgd) {
      // Labels stay the true labels.
      out = data;
      for (std::size_t i = 0; i < data.size(); ++i) out.images[i] = apply(data.images[i], data.labels[i]);
    } else {
      out = poison_all(data, *trigger);
    }
    write_dataset(dir / "attacked.snds", out);
    meta["output"] = "attacked.snds";
    meta["count"] = out.size();
  }
  write_json(dir / "attack.json", meta);
  return kOk;
}

SancdifiConfig image_config(const RunConfig& cfg, std::size_t index) {
  SancdifiConfig sc = cfg.experiment.sancdifi;
  sc.seed = image_seed(cfg.experiment.master_seed, index);
  return sc;
}

int cmd_saliency(const Common& common, const std::string& input, const std::string& classifier,
                 std::size_t index) {
  const RunConfig cfg = load(common);
  const fs::path dir = output_dir(cfg);
  const ImageTensor x = read_tensor_file(input);
  const ToyClassifier f = read_classifier(classifier);
  const SancdifiConfig sc = image_config(cfg, index);
  const VisibleMask visible = compute_visible_mask(x, f, sc);

  std::vector<std::pair<std::string, std::string>> tiles = {{"input", "input.pgm"}};
  write_pnm(dir / "input.pgm", x);
  ordered_json maps = ordered_json::array();
  for (const auto& m : visible.maps) {
    const std::string file = "saliency_class_" + std::to_string(m.class_id) + ".pgm";
    write_heatmap_pgm(dir / file, m.height, m.width, m.scores);
    tiles.emplace_back("saliency_class_" + std::to_string(m.class_id), file);
    ordered_json scores = ordered_json::array();
    for (double s : m.scores) scores.push_back(s);
    maps.push_back({{"class", m.class_id}, {"file", file}, {"scores", scores}});
  }
  write_mask_pgm(dir / "mask.pgm", visible.mask);
  tiles.emplace_back("mask", "mask.pgm");
  write_montage(dir, tiles);

  ordered_json meta = run_header(cfg, "saliency");
  meta["image_seed"] = sc.seed;
  meta["classes"] = visible.classes;
  meta["r_clipped"] = visible.r_clipped;
  meta["mask_density"] = visible.mask.density();
  meta["maps"] = maps;
  write_json(dir / "saliency.json", meta);
  return kOk;
}

struct PurifyArgs {
  std::string input;
  std::string trojan;
  std::string denoiser;
  bool diffpure = false;
  bool no_phase2 = false;
  std::optional<int> t_stop;
  std::size_t index = 0;
};

int cmd_purify(const Common& common, const PurifyArgs& args) {
  const RunConfig cfg = load(common);
  const fs::path dir = output_dir(cfg);
  require(!(args.diffpure && args.no_phase2), ErrorKind::InvalidArgument,
          "--diffpure and --no-phase2 are exclusive");
  const ImageTensor x = read_tensor_file(args.input);
  const ToyClassifier f = read_classifier(args.trojan);
  const ToyNoisePredictor eps = read_noise_predictor(args.denoiser);
  SancdifiConfig sc = image_config(cfg, args.index);

  ordered_json meta = run_header(cfg, "purify");
  std::vector<std::pair<std::string, std::string>> tiles = {{"input", "input.pgm"}};
  write_pnm(dir / "input.pgm", x);
  ImageTensor y;
  if (args.diffpure) {
    const Defense d = Defense::diffpure(args.t_stop.value_or(sc.t1));
    y = apply_defenses(x, std::span(&d, 1), f, eps, sc).front();
    meta["defense"] = d.name();
    meta["image_seed"] = sc.seed;
  } else {
    if (args.no_phase2) sc.t2 = 0;
    const SancdifiResult r = sancdifi_purify(x, f, eps, sc);
    y = r.output;
    write_mask_pgm(dir / "mask.pgm", r.mask);
    tiles.emplace_back("mask", "mask.pgm");
    meta["defense"] = args.no_phase2 ? Defense::no_phase2().name() : Defense::sancdifi(sc.t2).name();
    meta["diagnostics"] = ordered_json::parse(r.diagnostics.to_json());
  }
  write_tensor_file(dir / "purified.snc", y);
  write_pnm(dir / "purified.pgm", y);
  tiles.emplace_back("purified", "purified.pgm");
  write_montage(dir, tiles);

  const auto before = f.predict_probs(x);
  const auto after = f.predict_probs(y);
  meta["label_before"] = argmax(before);
  meta["label_after"] = argmax(after);
  meta["probs_before"] = before;
  meta["probs_after"] = after;
  write_json(dir / "purify.json", meta);
  return kOk;
}

int cmd_evaluate(const Common& common, bool ablate) {
  const RunConfig cfg = load(common);
  const fs::path dir = output_dir(cfg);
  const MetricsReport report =
      ablate ? ablation_suite(cfg.experiment) : run_experiment(cfg.experiment);
  const std::string stem = ablate ? "ablation" : "metrics";
  write_text(dir / (stem + ".csv"), report.to_csv());
  write_text(dir / (stem + ".json"), report.to_json());
  // The output location is an invocation detail; leaving it out keeps reruns
  // into different directories byte-identical.
  auto resolved = to_json(cfg);
  resolved.erase("output_dir");
  write_json(dir / "config.json", resolved);
  std::cout << report.to_csv();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency-masked diffusion purification against backdoor triggers"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool writes) {
    sub->add_option("--config", common.config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    if (writes) {
      sub->add_option("--output-dir", common.output_dir, "Directory for all outputs");
    }
  };

  auto* defaults = app.add_subcommand("defaults", "Print the default run configuration");
  add_common(defaults, false);

  int samples = 8;
  auto* gen = app.add_subcommand("gen-data", "Generate the train and validation splits");
  add_common(gen, true);
  gen->add_option("--samples", samples, "Validation images exported as tensors")
      ->check(CLI::NonNegativeNumber);

  std::string data_path;
  std::string validation_path;
  std::string attack_name;
  auto* train_clean = app.add_subcommand("train-clean", "Train the clean classifier");
  add_common(train_clean, true);
  train_clean->add_option("--data", data_path, "Training split (.snds)")->required();
  train_clean->add_option("--validation", validation_path, "Validation split (.snds)")
      ->required();

  auto* train_trojan = app.add_subcommand("train-trojan", "Train a backdoored classifier");
  add_common(train_trojan, true);
  train_trojan->add_option("--data", data_path, "Training split (.snds)")->required();
  train_trojan->add_option("--validation", validation_path, "Validation split (.snds)")
      ->required();
  train_trojan->add_option("--attack", attack_name, "badnet or invisible")
      ->required()
      ->check(CLI::IsMember({"badnet", "invisible"}));

  auto* train_den = app.add_subcommand("train-denoiser", "Train the noise predictor");
  add_common(train_den, true);
  train_den->add_option("--data", data_path, "Training split (.snds)")->required();

  AttackArgs attack_args;
  auto* attack = app.add_subcommand("attack", "Apply a trigger or PGD");
  add_common(attack, true);
  attack->add_option("--attack", attack_args.attack, "badnet, invisible or pgd")
      ->required()
      ->check(CLI::IsMember({"badnet", "invisible", "pgd"}));
  attack->add_option("--input", attack_args.input, "Single image (.snc)");
  attack->add_option("--data", attack_args.data, "Dataset (.snds)");
  attack->add_option("--classifier", attack_args.classifier, "Attacked model for pgd (.snmw)");
  attack->add_option("--label", attack_args.label, "True label of --input for pgd");

  std::string input;
  std::string classifier;
  std::size_t index = 0;
  auto* saliency = app.add_subcommand("saliency", "RISE maps and the visible mask");
  add_common(saliency, true);
  saliency->add_option("--input", input, "Image (.snc)")->required();
  saliency->add_option("--classifier", classifier, "Classifier (.snmw)")->required();
  saliency->add_option("--index", index, "Image index selecting the per-image seed");

  PurifyArgs purify_args;
  auto* purify_cmd = app.add_subcommand("purify", "Purify one image");
  add_common(purify_cmd, true);
  purify_cmd->add_option("--input", purify_args.input, "Image (.snc)")->required();
  purify_cmd->add_option("--trojan", purify_args.trojan, "Classifier (.snmw)")->required();
  purify_cmd->add_option("--denoiser", purify_args.denoiser, "Noise predictor (.snmw)")
      ->required();
  purify_cmd->add_flag("--diffpure", purify_args.diffpure, "Unmasked diffusion purification");
  purify_cmd->add_flag("--no-phase2", purify_args.no_phase2, "Skip the complement phase");
  purify_cmd->add_option("--t-stop", purify_args.t_stop, "DiffPure depth (default t1)");
  purify_cmd->add_option("--index", purify_args.index, "Image index selecting the per-image seed");

  auto* evaluate = app.add_subcommand("evaluate", "Run the configured experiment");
  add_common(evaluate, true);
  evaluate->add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate", "Run the ablation suite");
  add_common(ablate, true);
  ablate->add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kUsage);
  }

  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) common.seed = seed;
  }

  try {
    if (*defaults) return cmd_defaults(common);
    if (*gen) return cmd_gen_data(common, samples);
    if (*train_clean) {
      return cmd_train_classifier(common, "train-clean", "pgd", data_path, validation_path);
    }
    if (*train_trojan) {
      return cmd_train_classifier(common, "train-trojan", attack_name, data_path,
                                  validation_path);
    }
    if (*train_den) return cmd_train_denoiser(common, data_path);
    if (*attack) return cmd_attack(common, attack_args);
    if (*saliency) return cmd_saliency(common, input, classifier, index);
    if (*purify_cmd) return cmd_purify(common, purify_args);
    if (*evaluate) return cmd_evaluate(common, false);
    if (*ablate) return cmd_evaluate(common, true);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return report_error("io", e.what(), kIo);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), kInternal);
  }
  return report_error("usage", "no subcommand", kUsage);
}
