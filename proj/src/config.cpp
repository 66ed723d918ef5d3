#include "sancdifi/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "sancdifi/error.hpp"
#include "sancdifi/io.hpp"

namespace sancdifi {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object, type-checking each and rejecting any
// key that was never asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorKind::Config, where() + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        require(it->is_boolean(), ErrorKind::Config, "");
      } else if constexpr (std::is_integral_v<T>) {
        require(it->is_number_integer(), ErrorKind::Config, "");
        if constexpr (std::is_unsigned_v<T>) {
          require(it->is_number_unsigned(), ErrorKind::Config, "");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        require(it->is_number(), ErrorKind::Config, "");
      } else if constexpr (std::is_same_v<T, std::string>) {
        require(it->is_string(), ErrorKind::Config, "");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      fail(ErrorKind::Config, where(key) + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), where(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      require(seen_.contains(item.key()), ErrorKind::Config,
              "unknown key " + where(item.key().c_str()));
    }
  }

 private:
  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "<root>" : path_;
    if (key) p = path_.empty() ? std::string(key) : path_ + "." + key;
    return "'" + p + "'";
  }

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

void read_train_config(Section s, TrainConfig& c) {
  s.read("epochs", c.epochs);
  s.read("batch_size", c.batch_size);
  s.read("learning_rate", c.learning_rate);
  std::string opt = c.optimizer == Optimizer::Adam ? "adam" : "sgd";
  s.read("optimizer", opt);
  require(opt == "adam" || opt == "sgd", ErrorKind::Config,
          "optimizer must be \"adam\" or \"sgd\"");
  c.optimizer = opt == "adam" ? Optimizer::Adam : Optimizer::Sgd;
  s.read("cosine_decay", c.cosine_decay);
  s.finish();
}

AttackSpec& attack_slot(std::vector<AttackSpec>& all, AttackKind kind) {
  for (auto& a : all) {
    if (a.kind == kind) return a;
  }
  fail(ErrorKind::Config, "missing attack slot");
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  ExperimentSpec& spec = cfg.experiment;
  // Parameters for every attack kind; experiment.attacks selects the ones run.
  std::vector<AttackSpec> all_attacks;
  for (AttackKind kind : {AttackKind::BadNet, AttackKind::Invisible, AttackKind::Pgd}) {
    AttackSpec a;
    a.kind = kind;
    for (const auto& d : spec.attacks) {
      if (d.kind == kind) a = d;
    }
    all_attacks.push_back(a);
  }
  std::vector<std::string> attack_names;
  for (const auto& a : spec.attacks) attack_names.push_back(to_string(a.kind));

  Section root(j, "");
  root.read("master_seed", spec.master_seed);
  root.read("output_dir", cfg.output_dir);

  if (root.has("dataset")) {
    Section s = root.child("dataset");
    s.read("image_size", spec.dataset.image_size);
    s.read("num_classes", spec.dataset.num_classes);
    s.read("channels", spec.dataset.channels);
    s.read("per_class_count", spec.dataset.per_class_count);
    s.read("validation_per_class", spec.validation_per_class);
    s.read("noise_std", spec.dataset.noise_std);
    s.read("background", spec.dataset.background);
    s.read("foreground", spec.dataset.foreground);
    s.read("glyph_scale", spec.dataset.glyph_scale);
    s.finish();
  }
  if (root.has("models")) {
    Section s = root.child("models");
    if (s.has("classifier")) read_train_config(s.child("classifier"), spec.classifier);
    if (s.has("denoiser")) read_train_config(s.child("denoiser"), spec.denoiser);
    s.finish();
  }
  if (root.has("attack")) {
    Section s = root.child("attack");
    if (s.has("badnet")) {
      Section b = s.child("badnet");
      AttackSpec& a = attack_slot(all_attacks, AttackKind::BadNet);
      b.read("target_label", a.target_label);
      b.read("poison_fraction", a.poison_fraction);
      b.read("patch_size", a.patch_size);
      b.finish();
    }
    if (s.has("invisible")) {
      Section b = s.child("invisible");
      AttackSpec& a = attack_slot(all_attacks, AttackKind::Invisible);
      b.read("target_label", a.target_label);
      b.read("poison_fraction", a.poison_fraction);
      b.read("epsilon_inf", a.epsilon_inf);
      b.read("tile", a.tile);
      b.finish();
    }
    if (s.has("pgd")) {
      Section b = s.child("pgd");
      AttackSpec& a = attack_slot(all_attacks, AttackKind::Pgd);
      b.read("epsilon", a.pgd_epsilon);
      b.read("steps", a.pgd_steps);
      b.read("step_size", a.pgd_step_size);
      b.finish();
    }
    s.finish();
  }
  if (root.has("sancdifi")) {
    Section s = root.child("sancdifi");
    SancdifiConfig& sc = spec.sancdifi;
    s.read("t1", sc.t1);
    s.read("t2", sc.t2);
    s.read("percentile", sc.percentile);
    s.read("top_r", sc.top_r);
    s.read("final_step_noise", sc.final_step_noise);
    if (s.has("rise")) {
      Section r = s.child("rise");
      r.read("num_masks", sc.rise.num_masks);
      r.read("cell_grid", sc.rise.cell_grid);
      r.read("keep_prob", sc.rise.keep_prob);
      r.read("baseline", sc.rise.baseline);
      r.finish();
    }
    if (s.has("schedule")) {
      Section r = s.child("schedule");
      int steps = sc.schedule.steps;
      double start = sc.schedule.beta.front();
      double end = sc.schedule.beta.back();
      r.read("steps", steps);
      r.read("beta_start", start);
      r.read("beta_end", end);
      r.finish();
      try {
        sc.schedule = make_linear_schedule(steps, start, end);
      } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("sancdifi.schedule: ") + e.what());
      }
    }
    s.finish();
  }
  if (root.has("experiment")) {
    Section s = root.child("experiment");
    s.read("name", spec.name);
    s.read("attacks", attack_names);
    std::vector<std::string> defense_names;
    for (const auto& d : spec.defenses) defense_names.push_back(d.name());
    s.read("defenses", defense_names);
    spec.defenses.clear();
    for (const auto& n : defense_names) spec.defenses.push_back(Defense::parse(n));
    s.read("ks", spec.ks);
    s.finish();
  }
  root.finish();

  spec.attacks.clear();
  for (const auto& n : attack_names) {
    spec.attacks.push_back(attack_slot(all_attacks, attack_kind_from_string(n)));
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    fail(ErrorKind::Config, e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::stringstream text;
  text << in.rdbuf();
  json j;
  try {
    j = json::parse(text.str());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, "malformed JSON in " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json spec = config.experiment.to_json();
  nlohmann::ordered_json j;
  j["master_seed"] = spec["master_seed"];
  j["output_dir"] = config.output_dir;
  for (const auto& item : spec.items()) {
    if (item.key() != "master_seed") j[item.key()] = item.value();
  }
  return j;
}

}  // namespace sancdifi
