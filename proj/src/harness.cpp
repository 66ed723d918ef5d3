#include "sancdifi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "sancdifi/error.hpp"

namespace sancdifi {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double percent(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(std::max(1, workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::uint64_t classifier_seed(std::uint64_t master, AttackKind kind) {
  return derive_seed(master, Stream::WeightInit, 10 + static_cast<std::uint64_t>(kind));
}

// ---------------------------------------------------------------------------
// Defenses

std::string Defense::name() const {
  switch (kind) {
    case DefenseKind::None:
      return "none";
    case DefenseKind::Sancdifi:
      return "sancdifi_t2_" + std::to_string(steps);
    case DefenseKind::SancdifiNoPhase2:
      return "sancdifi_no_phase2";
    case DefenseKind::DiffPure:
      return "diffpure_" + std::to_string(steps);
  }
  return "unknown";
}

Defense Defense::parse(const std::string& name) {
  auto number_after = [&](std::size_t prefix) {
    const std::string digits = name.substr(prefix);
    require(!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit),
            ErrorKind::Config, "malformed defense name '" + name + "'");
    return std::stoi(digits);
  };
  if (name == "none") return none();
  if (name == "sancdifi_no_phase2") return no_phase2();
  if (name.rfind("sancdifi_t2_", 0) == 0) return sancdifi(number_after(12));
  if (name.rfind("diffpure_", 0) == 0) return diffpure(number_after(9));
  fail(ErrorKind::Config, "unknown defense '" + name +
                              "' (expected none, sancdifi_t2_<steps>, sancdifi_no_phase2 or "
                              "diffpure_<steps>)");
}

std::vector<ImageTensor> apply_defenses(const ImageTensor& x, std::span<const Defense> defenses,
                                        const ClassifierInterface& f,
                                        const NoisePredictorInterface& eps,
                                        const SancdifiConfig& cfg) {
  std::vector<ImageTensor> out;
  out.reserve(defenses.size());
  std::optional<BinaryMask> keep;
  std::optional<ImageTensor> phase1;
  auto ensure_phase1 = [&] {
    if (phase1) return;
    keep = compute_visible_mask(x, f, cfg).mask;
    phase1 = purify(x, *keep, phase1_config(cfg), eps);
  };
  for (const Defense& d : defenses) {
    switch (d.kind) {
      case DefenseKind::None:
        out.push_back(x);
        break;
      case DefenseKind::Sancdifi: {
        SancdifiConfig second = cfg;
        second.t2 = d.steps;
        second.validate();
        ensure_phase1();
        out.push_back(purify(*phase1, keep->complement(), phase2_config(second), eps));
        break;
      }
      case DefenseKind::SancdifiNoPhase2:
        ensure_phase1();
        out.push_back(*phase1);
        break;
      case DefenseKind::DiffPure: {
        require(d.steps >= 0 && d.steps <= cfg.schedule.steps, ErrorKind::InvalidArgument,
                "diffpure depth outside [0, T]");
        PurifyConfig p = phase1_config(cfg);
        p.t_stop = d.steps;
        out.push_back(diffpure(x, p, eps));
        break;
      }
    }
  }
  return out;
}

std::uint64_t image_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, Stream::Evaluation, index);
}

DefenseFn identity_defense() {
  return [](const ImageTensor& x, std::size_t) { return x; };
}

DefenseFn make_defense_fn(const Defense& defense, const ClassifierInterface& f,
                          const NoisePredictorInterface& eps, const SancdifiConfig& base,
                          std::uint64_t seed) {
  return [defense, &f, &eps, base, seed](const ImageTensor& x, std::size_t index) {
    SancdifiConfig cfg = base;
    cfg.seed = image_seed(seed, index);
    return apply_defenses(x, std::span(&defense, 1), f, eps, cfg).front();
  };
}

// ---------------------------------------------------------------------------
// Metrics

bool in_top_k(std::span<const double> probs, int label, int k) {
  if (label < 0 || label >= static_cast<int>(probs.size())) return false;
  // Ties rank toward the lower index, as in topk_classes.
  int rank = 0;
  for (int j = 0; j < static_cast<int>(probs.size()); ++j) {
    if (probs[j] > probs[label] || (probs[j] == probs[label] && j < label)) ++rank;
  }
  return rank < k;
}

double eval_clean_accuracy(const ClassifierInterface& f, const DefenseFn& defense,
                           const LabeledDataset& data, int k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto probs = f.predict_probs(defense(data.images[i], i));
    hits += in_top_k(probs, data.labels[i], k);
  }
  return percent(hits, data.size());
}

double eval_asr(const ClassifierInterface& f, const DefenseFn& defense,
                const LabeledDataset& data, const TriggerSpec& trigger, int k) {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == trigger.target_label) continue;
    const auto probs = f.predict_probs(defense(embed_trigger(data.images[i], trigger), i));
    hits += in_top_k(probs, trigger.target_label, k);
    ++total;
  }
  return percent(hits, total);
}

std::vector<int> default_metric_ks(int num_classes) {
  std::vector<int> ks{1};
  const int second = std::min(5, num_classes - 1);
  if (second > 1) ks.push_back(second);
  return ks;
}

// ---------------------------------------------------------------------------
// Experiments

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::BadNet:
      return "badnet";
    case AttackKind::Invisible:
      return "invisible";
    case AttackKind::Pgd:
      return "pgd";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "badnet") return AttackKind::BadNet;
  if (name == "invisible") return AttackKind::Invisible;
  if (name == "pgd") return AttackKind::Pgd;
  fail(ErrorKind::Config, "unknown attack '" + name + "' (expected badnet, invisible or pgd)");
}

void ExperimentSpec::validate() const {
  require(!attacks.empty(), ErrorKind::Config, "experiment needs at least one attack");
  require(!defenses.empty(), ErrorKind::Config, "experiment needs at least one defense");
  require(validation_per_class >= 1, ErrorKind::Config, "validation_per_class must be >= 1");
  require(workers >= 1, ErrorKind::Config, "workers must be >= 1");
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    for (std::size_t j = i + 1; j < attacks.size(); ++j) {
      require(attacks[i].kind != attacks[j].kind, ErrorKind::Config,
              "attack '" + to_string(attacks[i].kind) + "' listed twice");
    }
  }
  sancdifi.validate();
  for (int k : ks) {
    require(k >= 1 && k <= dataset.num_classes, ErrorKind::Config,
            "metric k=" + std::to_string(k) + " outside [1, K]");
  }
  for (const auto& a : attacks) {
    require(a.target_label >= 0 && a.target_label < dataset.num_classes,
            ErrorKind::ClassOutOfRange, "attack target label outside [0, K)");
    require(a.poison_fraction >= 0.0 && a.poison_fraction <= 1.0, ErrorKind::Config,
            "poison_fraction must lie in [0, 1]");
    require(a.pgd_steps >= 0 && a.pgd_epsilon >= 0.0 && a.pgd_step_size >= 0.0,
            ErrorKind::Config, "PGD parameters must be non-negative");
  }
  for (const auto& d : defenses) {
    if (d.kind == DefenseKind::Sancdifi) {
      require(d.steps >= 0 && d.steps < sancdifi.t1, ErrorKind::Config,
              "phase-2 depth of " + d.name() + " must be below t1");
    }
    if (d.kind == DefenseKind::DiffPure) {
      require(d.steps >= 0 && d.steps <= sancdifi.schedule.steps, ErrorKind::Config,
              "depth of " + d.name() + " outside [0, T]");
    }
  }
}

namespace {

nlohmann::ordered_json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == Optimizer::Adam ? "adam" : "sgd"},
          {"cosine_decay", c.cosine_decay}};
}

}  // namespace

nlohmann::ordered_json ExperimentSpec::to_json() const {
  nlohmann::ordered_json j;
  j["master_seed"] = master_seed;
  j["dataset"] = {{"image_size", dataset.image_size},
                  {"num_classes", dataset.num_classes},
                  {"channels", dataset.channels},
                  {"per_class_count", dataset.per_class_count},
                  {"validation_per_class", validation_per_class},
                  {"noise_std", dataset.noise_std},
                  {"background", dataset.background},
                  {"foreground", dataset.foreground},
                  {"glyph_scale", dataset.glyph_scale}};
  j["models"] = {{"classifier", train_config_json(classifier)},
                 {"denoiser", train_config_json(denoiser)}};
  auto& attack_params = j["attack"] = nlohmann::ordered_json::object();
  for (const auto& a : attacks) {
    nlohmann::ordered_json aj;
    switch (a.kind) {
      case AttackKind::BadNet:
        aj = {{"target_label", a.target_label},
              {"poison_fraction", a.poison_fraction},
              {"patch_size", a.patch_size}};
        break;
      case AttackKind::Invisible:
        aj = {{"target_label", a.target_label},
              {"poison_fraction", a.poison_fraction},
              {"epsilon_inf", a.epsilon_inf},
              {"tile", a.tile}};
        break;
      case AttackKind::Pgd:
        aj = {{"epsilon", a.pgd_epsilon}, {"steps", a.pgd_steps}, {"step_size", a.pgd_step_size}};
        break;
    }
    attack_params[to_string(a.kind)] = aj;
  }
  j["sancdifi"] = {{"t1", sancdifi.t1},
                   {"t2", sancdifi.t2},
                   {"percentile", sancdifi.percentile},
                   {"top_r", sancdifi.top_r},
                   {"rise",
                    {{"num_masks", sancdifi.rise.num_masks},
                     {"cell_grid", sancdifi.rise.cell_grid},
                     {"keep_prob", sancdifi.rise.keep_prob},
                     {"baseline", sancdifi.rise.baseline}}},
                   {"schedule",
                    {{"steps", sancdifi.schedule.steps},
                     {"beta_start", sancdifi.schedule.beta.front()},
                     {"beta_end", sancdifi.schedule.beta.back()}}},
                   {"final_step_noise", sancdifi.final_step_noise}};
  nlohmann::ordered_json ex;
  ex["name"] = name;
  ex["attacks"] = nlohmann::ordered_json::array();
  for (const auto& a : attacks) ex["attacks"].push_back(to_string(a.kind));
  ex["defenses"] = nlohmann::ordered_json::array();
  for (const auto& d : defenses) ex["defenses"].push_back(d.name());
  ex["ks"] = ks;
  j["experiment"] = ex;
  return j;
}

ExperimentSpec default_experiment() {
  ExperimentSpec spec;
  spec.name = "toy";
  spec.dataset.image_size = 16;
  spec.dataset.num_classes = 4;
  spec.dataset.channels = 1;
  spec.dataset.per_class_count = 500;
  spec.dataset.noise_std = 0.02;
  spec.dataset.background = 0.3;
  spec.dataset.foreground = 0.65;
  spec.validation_per_class = 25;
  spec.classifier.epochs = 60;
  spec.classifier.learning_rate = 0.02;
  spec.classifier.batch_size = 32;
  spec.denoiser.epochs = 200;
  spec.denoiser.learning_rate = 0.02;
  spec.denoiser.cosine_decay = true;
  spec.denoiser.batch_size = 32;

  AttackSpec badnet;
  badnet.kind = AttackKind::BadNet;
  AttackSpec invisible;
  invisible.kind = AttackKind::Invisible;
  AttackSpec pgd;
  pgd.kind = AttackKind::Pgd;
  spec.attacks = {badnet, invisible, pgd};
  spec.defenses = {Defense::none(), Defense::sancdifi(spec.sancdifi.t2),
                   Defense::diffpure(spec.sancdifi.schedule.steps * 3 / 10),
                   Defense::no_phase2()};
  return spec;
}

ShapeDatasetSpec split_spec(const ExperimentSpec& spec, Split split) {
  ShapeDatasetSpec data = spec.dataset;
  data.split = split;
  data.seed = derive_seed(spec.master_seed, Stream::DataGen, static_cast<std::uint64_t>(split));
  if (split == Split::Validation) data.per_class_count = spec.validation_per_class;
  return data;
}

TrainedNoisePredictor train_denoiser(const ExperimentSpec& spec, const LabeledDataset& train) {
  TrainConfig dc = spec.denoiser;
  dc.seed = derive_seed(spec.master_seed, Stream::WeightInit, 1);
  return train_noise_predictor(train, spec.sancdifi.schedule, dc);
}

Workbench build_workbench(const ExperimentSpec& spec) {
  spec.validate();
  Workbench bench;
  const ShapeDatasetSpec train = split_spec(spec, Split::Train);
  const ShapeDatasetSpec validation = split_spec(spec, Split::Validation);
  bench.train_seed = train.seed;
  bench.validation_seed = validation.seed;
  bench.train = generate_shape_dataset(train);
  bench.validation = generate_shape_dataset(validation);
  bench.denoiser_seed = derive_seed(spec.master_seed, Stream::WeightInit, 1);
  bench.denoiser = train_denoiser(spec, bench.train);
  return bench;
}

TrainedClassifier train_attack_classifier(const ExperimentSpec& spec, const AttackSpec& attack,
                                          const LabeledDataset& train,
                                          const LabeledDataset& validation) {
  TrainConfig cc = spec.classifier;
  cc.seed = classifier_seed(spec.master_seed, attack.kind);
  cc.target_label = attack.target_label;
  if (attack.kind == AttackKind::Pgd) {
    cc.poison_fraction = 0.0;
    TrainedClassifier trained = train_classifier(train, cc);
    trained.clean_accuracy = top1_accuracy(trained.model, validation);
    return trained;
  }
  cc.poison_fraction = attack.poison_fraction;
  return train_trojan_classifier(train, validation,
                                 make_trigger(attack, spec.dataset, spec.master_seed), cc);
}

TriggerSpec make_trigger(const AttackSpec& attack, const ShapeDatasetSpec& dataset,
                         std::uint64_t master_seed) {
  switch (attack.kind) {
    case AttackKind::BadNet:
      return make_badnet_trigger(dataset.image_size, dataset.channels, attack.patch_size,
                                 Corner::BottomRight, attack.target_label);
    case AttackKind::Invisible:
      return make_invisible_trigger(dataset.image_size, dataset.channels, attack.epsilon_inf,
                                    attack.target_label,
                                    derive_seed(master_seed, Stream::Trigger), attack.tile);
    case AttackKind::Pgd:
      break;
  }
  fail(ErrorKind::InvalidArgument, "PGD has no trigger");
}

const MetricsRow& MetricsReport::find(const std::string& attack, const std::string& defense,
                                      int k) const {
  for (const auto& row : rows) {
    if (row.attack == attack && row.defense == defense && row.k == k) return row;
  }
  fail(ErrorKind::InvalidArgument,
       "no metrics row for " + attack + "/" + defense + "/k=" + std::to_string(k));
}

std::string MetricsReport::to_csv() const {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += r.experiment + "," + r.attack + "," + r.defense + "," + std::to_string(r.k) + "," +
           format_number(r.clean_acc_nodef) + "," + format_number(r.clean_acc_def) + "," +
           format_number(r.car) + "," + format_number(r.asr) + "," + std::to_string(r.n) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["metadata"] = metadata;
  auto& attack_list = j["attacks"] = nlohmann::ordered_json::array();
  for (const auto& a : attacks) {
    attack_list.push_back({{"attack", a.attack},
                           {"clean_accuracy", a.clean_accuracy},
                           {"attack_success", a.attack_success},
                           {"attempts", a.attempts},
                           {"asr_population", a.asr_population}});
  }
  auto& row_list = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    row_list.push_back({{"experiment", r.experiment},
                        {"attack", r.attack},
                        {"defense", r.defense},
                        {"k", r.k},
                        {"clean_acc_nodef", r.clean_acc_nodef},
                        {"clean_acc_def", r.clean_acc_def},
                        {"CAR", r.car},
                        {"ASR", r.asr},
                        {"n", r.n},
                        {"seed", r.seed}});
  }
  return j.dump(2) + "\n";
}

MetricsReport run_experiment(const ExperimentSpec& spec) {
  return run_experiment(spec, build_workbench(spec));
}

MetricsReport run_experiment(const ExperimentSpec& spec, const Workbench& bench) {
  spec.validate();
  const LabeledDataset& val = bench.validation;
  const auto& eps = bench.denoiser.model;
  const int K = val.num_classes;
  const std::vector<int> ks = spec.ks.empty() ? default_metric_ks(K) : spec.ks;
  const std::size_t n_val = val.size();
  const std::size_t n_def = spec.defenses.size();

  MetricsReport report;
  report.metadata["spec"] = spec.to_json();
  report.metadata["seeds"] = {{"master", spec.master_seed},
                              {"train_data", bench.train_seed},
                              {"validation_data", bench.validation_seed},
                              {"denoiser", bench.denoiser_seed},
                              {"trigger", derive_seed(spec.master_seed, Stream::Trigger)},
                              {"defense_per_image", "derive(master, evaluation, image index)"}};
  report.metadata["denoiser"] = {{"initial_loss", bench.denoiser.initial_loss},
                                 {"final_loss", bench.denoiser.final_loss}};
  report.metadata["definitions"] = {
      {"CAR", "clean_acc_nodef - clean_acc_def, percentage points"},
      {"ASR_backdoor",
       "percent of triggered validation images with true label != target whose top-k "
       "contains the target"},
      {"ASR_pgd",
       "percent of validation images whose undefended PGD top-1 label differs from the "
       "true label and lies in the defended top-k"},
      {"n", "images in the ASR population"},
      {"k", "top-k; top-K is omitted because it is 100% by construction"}};

  for (const AttackSpec& attack : spec.attacks) {
    const bool pgd = attack.kind == AttackKind::Pgd;
    const TrainedClassifier trained = train_attack_classifier(spec, attack, bench.train, val);
    std::optional<TriggerSpec> trigger;
    if (!pgd) trigger = make_trigger(attack, spec.dataset, spec.master_seed);
    const ToyClassifier& f = trained.model;

    // Attacked inputs, their population flags and the label the attack aims for.
    std::vector<ImageTensor> attacked(n_val);
    std::vector<int> aim(n_val, -1);
    parallel_for(n_val, spec.workers, [&](std::size_t i) {
      if (pgd) {
        attacked[i] = pgd_attack(f, val.images[i], val.labels[i], attack.pgd_epsilon,
                                 attack.pgd_steps, attack.pgd_step_size);
        const int adv = argmax(f.predict_probs(attacked[i]));
        if (adv != val.labels[i]) aim[i] = adv;
      } else if (val.labels[i] != trigger->target_label) {
        attacked[i] = embed_trigger(val.images[i], *trigger);
        aim[i] = trigger->target_label;
      }
    });
    // PGD counts every image; backdoors skip the target class.
    std::size_t population = 0;
    for (std::size_t i = 0; i < n_val; ++i) {
      population += pgd ? 1 : (aim[i] >= 0 ? 1 : 0);
    }

    // probs[d][i] for clean and attacked inputs under every defense.
    using Probs = std::vector<std::vector<std::vector<double>>>;
    Probs clean_probs(n_def, std::vector<std::vector<double>>(n_val));
    Probs attack_probs(n_def, std::vector<std::vector<double>>(n_val));
    parallel_for(2 * n_val, spec.workers, [&](std::size_t job) {
      const std::size_t i = job / 2;
      const bool on_attack = job % 2 == 1;
      if (on_attack && attacked[i].empty()) return;
      SancdifiConfig cfg = spec.sancdifi;
      cfg.seed = image_seed(spec.master_seed, i);
      const ImageTensor& x = on_attack ? attacked[i] : val.images[i];
      const auto outputs = apply_defenses(x, spec.defenses, f, eps, cfg);
      Probs& dst = on_attack ? attack_probs : clean_probs;
      for (std::size_t d = 0; d < n_def; ++d) dst[d][i] = f.predict_probs(outputs[d]);
    });

    const std::string attack_name = to_string(attack.kind);
    AttackSummary summary;
    summary.attack = attack_name;
    summary.clean_accuracy = trained.clean_accuracy;
    summary.attempts = trained.attempts;
    summary.asr_population = population;
    {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n_val; ++i) {
        if (aim[i] >= 0 && argmax(f.predict_probs(attacked[i])) == aim[i]) ++hits;
      }
      summary.attack_success = population == 0 ? 0.0 : double(hits) / double(population);
    }
    report.attacks.push_back(summary);
    report.metadata["classifier_seeds"][attack_name] =
        classifier_seed(spec.master_seed, attack.kind);

    for (int k : ks) {
      std::size_t clean_nodef_hits = 0;
      for (std::size_t i = 0; i < n_val; ++i) {
        clean_nodef_hits += in_top_k(f.predict_probs(val.images[i]), val.labels[i], k);
      }
      const double clean_nodef = percent(clean_nodef_hits, n_val);
      for (std::size_t d = 0; d < n_def; ++d) {
        std::size_t clean_hits = 0;
        std::size_t attack_hits = 0;
        for (std::size_t i = 0; i < n_val; ++i) {
          clean_hits += in_top_k(clean_probs[d][i], val.labels[i], k);
          if (aim[i] >= 0) attack_hits += in_top_k(attack_probs[d][i], aim[i], k);
        }
        MetricsRow row;
        row.experiment = spec.name;
        row.attack = attack_name;
        row.defense = spec.defenses[d].name();
        row.k = k;
        row.clean_acc_nodef = clean_nodef;
        row.clean_acc_def = percent(clean_hits, n_val);
        row.car = row.clean_acc_nodef - row.clean_acc_def;
        row.asr = percent(attack_hits, population);
        row.n = population;
        row.seed = spec.master_seed;
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

ExperimentSpec ablation_spec(const ExperimentSpec& base) {
  ExperimentSpec spec = base;
  const int T = base.sancdifi.schedule.steps;
  spec.name = base.name + "_ablation";
  spec.defenses = {Defense::none(),
                   Defense::sancdifi(base.sancdifi.t2),
                   Defense::sancdifi(150),
                   Defense::no_phase2(),
                   Defense::diffpure(static_cast<int>(std::lround(0.1 * T))),
                   Defense::diffpure(static_cast<int>(std::lround(0.2 * T))),
                   Defense::diffpure(static_cast<int>(std::lround(0.3 * T)))};
  // Drop duplicates (e.g. when the base t2 is already 150).
  std::vector<Defense> unique;
  for (const auto& d : spec.defenses) {
    if (std::find(unique.begin(), unique.end(), d) == unique.end()) unique.push_back(d);
  }
  spec.defenses = unique;
  return spec;
}

MetricsReport ablation_suite(const ExperimentSpec& base) {
  return run_experiment(ablation_spec(base));
}

}  // namespace sancdifi
