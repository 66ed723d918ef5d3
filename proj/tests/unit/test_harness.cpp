#include "doctest.h"
#include "json.hpp"
#include "sancdifi/config.hpp"
#include "sancdifi/error.hpp"
#include "sancdifi/harness.hpp"
#include "test_util.hpp"

using namespace sancdifi;

namespace {

// Small enough to run in seconds: PGD on a clean classifier, short schedule.
ExperimentSpec tiny_experiment() {
  ExperimentSpec spec = default_experiment();
  spec.name = "tiny";
  spec.master_seed = 5;
  spec.dataset.per_class_count = 30;
  spec.validation_per_class = 4;
  spec.classifier.epochs = 10;
  spec.denoiser.epochs = 2;
  spec.sancdifi.schedule = make_linear_schedule(100, 1e-4, 0.02);
  spec.sancdifi.t1 = 30;
  spec.sancdifi.t2 = 10;
  spec.sancdifi.rise.num_masks = 100;
  AttackSpec pgd;
  pgd.kind = AttackKind::Pgd;
  pgd.pgd_steps = 5;
  spec.attacks = {pgd};
  spec.defenses = {Defense::none(), Defense::sancdifi(10), Defense::no_phase2(),
                   Defense::diffpure(30)};
  return spec;
}

ImageTensor random_unit(std::uint64_t seed) {
  SeededRng rng(seed);
  ImageTensor x(16, 16, 1);
  for (auto& v : x.values()) v = rng.uniform();
  return x;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("defense names round trip") {
  for (const Defense& d : {Defense::none(), Defense::sancdifi(150), Defense::no_phase2(),
                           Defense::diffpure(300)}) {
    CHECK(Defense::parse(d.name()) == d);
  }
  CHECK(Defense::sancdifi(100).name() == "sancdifi_t2_100");
  CHECK(Defense::diffpure(300).name() == "diffpure_300");
  CHECK_THROWS_AS(Defense::parse("diffpure_"), Error);
  CHECK_THROWS_AS(Defense::parse("diffpure_1x"), Error);
  CHECK_THROWS_AS(Defense::parse("median"), Error);
}

TEST_CASE("attack kind names round trip") {
  for (auto k : {AttackKind::BadNet, AttackKind::Invisible, AttackKind::Pgd}) {
    CHECK(attack_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(attack_kind_from_string("wanet"), Error);
}

TEST_CASE("top-k membership") {
  const std::vector<double> p = {0.1, 0.5, 0.3, 0.1};
  CHECK(in_top_k(p, 1, 1));
  CHECK(!in_top_k(p, 2, 1));
  CHECK(in_top_k(p, 2, 2));
  // Ties rank toward the lower index.
  CHECK(in_top_k(p, 0, 3));
  CHECK(!in_top_k(p, 3, 3));
  CHECK(in_top_k(p, 3, 4));
  CHECK(!in_top_k(p, 7, 4));
}

TEST_CASE("default metric ks") {
  CHECK(default_metric_ks(4) == std::vector<int>{1, 3});
  CHECK(default_metric_ks(10) == std::vector<int>{1, 5});
  CHECK(default_metric_ks(2) == std::vector<int>{1});
}

TEST_CASE("combined defenses equal single-defense calls") {
  const ImageTensor x = random_unit(1);
  std::vector<double> w(256, 0.0);
  w[17] = 0.5;
  const testutil::LinearProbe f(w, 0.2);
  const testutil::ZeroEps eps;
  SancdifiConfig cfg;
  cfg.schedule = make_linear_schedule(100, 1e-4, 0.02);
  cfg.t1 = 30;
  cfg.t2 = 10;
  cfg.rise.num_masks = 100;
  const std::vector<Defense> all = {Defense::none(), Defense::sancdifi(10), Defense::sancdifi(20),
                                    Defense::no_phase2(), Defense::diffpure(30)};
  for (std::size_t index : {0u, 3u}) {
    SancdifiConfig per_image = cfg;
    per_image.seed = image_seed(9, index);
    const auto joint = apply_defenses(x, all, f, eps, per_image);
    for (std::size_t d = 0; d < all.size(); ++d) {
      CHECK(joint[d] == make_defense_fn(all[d], f, eps, cfg, 9)(x, index));
    }
    CHECK(joint[0] == x);
    CHECK(joint[1] == sancdifi_purify(x, f, eps, per_image).output);
    CHECK(joint[3] == sancdifi_no_second_phase(x, f, eps, per_image));
    // DiffPure with t_stop = t1 is Sancdifi phase 1 with an empty keep mask.
    CHECK(joint[4] == sancdifi_phases(x, BinaryMask::zeros(16, 16), eps,
                                      [&] {
                                        SancdifiConfig c = per_image;
                                        c.t2 = 0;
                                        return c;
                                      }()));
  }
}

TEST_CASE("metrics count and skip as documented") {
  testutil::ConstantClassifier f({0.1, 0.6, 0.3});
  LabeledDataset d;
  d.num_classes = 3;
  d.images = {ImageTensor(4, 4, 1), ImageTensor(4, 4, 1), ImageTensor(4, 4, 1),
              ImageTensor(4, 4, 1)};
  d.labels = {0, 1, 1, 2};
  CHECK(eval_clean_accuracy(f, identity_defense(), d, 1) == doctest::Approx(50.0));
  CHECK(eval_clean_accuracy(f, identity_defense(), d, 2) == doctest::Approx(75.0));
  TriggerSpec t = make_badnet_trigger(4, 1, 2, Corner::BottomRight, 2);
  // Target 2 is second-ranked: hit at k = 2, miss at k = 1; label-2 image skipped.
  CHECK(eval_asr(f, identity_defense(), d, t, 1) == 0.0);
  CHECK(eval_asr(f, identity_defense(), d, t, 2) == doctest::Approx(100.0));
}

TEST_CASE("experiment spec validation") {
  ExperimentSpec spec = default_experiment();
  spec.validate();
  spec.attacks.clear();
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = default_experiment();
  spec.ks = {0};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = default_experiment();
  spec.attacks[0].target_label = 4;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("ablation grid covers the required defenses") {
  const ExperimentSpec a = ablation_spec(default_experiment());
  std::vector<std::string> names;
  for (const auto& d : a.defenses) names.push_back(d.name());
  for (const char* want : {"none", "sancdifi_t2_100", "sancdifi_t2_150", "sancdifi_no_phase2",
                           "diffpure_100", "diffpure_200", "diffpure_300"}) {
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
  }
}

TEST_CASE("tiny experiment is deterministic and worker-count invariant") {
  ExperimentSpec spec = tiny_experiment();
  const MetricsReport a = run_experiment(spec);
  CHECK(a.rows.size() == spec.defenses.size() * 2);
  CHECK(a.to_csv().rfind(kMetricsCsvHeader, 0) == 0);
  CHECK(a.to_csv() == run_experiment(spec).to_csv());
  spec.workers = 3;
  const MetricsReport b = run_experiment(spec);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.to_json() == b.to_json());

  const MetricsRow& none = a.find("pgd", "none", 1);
  CHECK(none.car == 0.0);
  CHECK(none.clean_acc_def == none.clean_acc_nodef);
  for (const auto& row : a.rows) {
    CHECK(row.car == doctest::Approx(row.clean_acc_nodef - row.clean_acc_def));
    CHECK(row.asr >= 0.0);
    CHECK(row.asr <= 100.0);
    CHECK(row.seed == 5);
  }
  CHECK_THROWS_AS(a.find("pgd", "median", 1), Error);
  const auto meta = nlohmann::json::parse(a.to_json());
  CHECK(meta.contains("rows"));
}

TEST_CASE("run config defaults round trip through JSON") {
  const RunConfig d = default_run_config();
  const auto j = to_json(d);
  const RunConfig back = run_config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_json(back) == j);
  CHECK(back.experiment.to_json() == d.experiment.to_json());
}

TEST_CASE("run config overlays keys and rejects unknown ones") {
  const auto j = nlohmann::json::parse(R"({
    "master_seed": 7,
    "dataset": {"per_class_count": 12, "background": 0.2},
    "sancdifi": {"t1": 200, "t2": 50, "rise": {"num_masks": 64}},
    "experiment": {"attacks": ["badnet"], "defenses": ["none", "diffpure_100"], "ks": [1]}
  })");
  const RunConfig c = run_config_from_json(j);
  CHECK(c.experiment.master_seed == 7);
  CHECK(c.experiment.dataset.per_class_count == 12);
  CHECK(c.experiment.dataset.background == 0.2);
  CHECK(c.experiment.sancdifi.t1 == 200);
  CHECK(c.experiment.sancdifi.rise.num_masks == 64);
  REQUIRE(c.experiment.attacks.size() == 1);
  CHECK(c.experiment.attacks[0].kind == AttackKind::BadNet);
  CHECK(c.experiment.defenses.size() == 2);
  CHECK(c.experiment.ks == std::vector<int>{1});

  auto expect_config_error = [](const char* text) {
    try {
      run_config_from_json(nlohmann::json::parse(text));
      FAIL("expected a config error for " << text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
    }
  };
  expect_config_error(R"({"mastr_seed": 1})");
  expect_config_error(R"({"dataset": {"size": 16}})");
  expect_config_error(R"({"sancdifi": {"t1": "deep"}})");
  expect_config_error(R"({"experiment": {"defenses": ["median"]}})");
}

TEST_CASE("run config files report io errors") {
  testutil::TempDir dir;
  try {
    load_run_config(dir.path / "missing.json");
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

}  // TEST_SUITE
