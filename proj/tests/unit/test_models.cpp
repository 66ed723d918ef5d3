#include <cmath>
#include <numeric>

#include "doctest.h"
#include "sancdifi/attacks.hpp"
#include "sancdifi/datagen.hpp"
#include "sancdifi/error.hpp"
#include "sancdifi/models.hpp"
#include "sancdifi/schedule.hpp"
#include "test_util.hpp"

using namespace sancdifi;

namespace {

ImageTensor random_image(std::uint64_t seed, int size, int channels, Domain domain) {
  SeededRng rng(seed);
  ImageTensor x(size, size, channels, domain);
  for (auto& v : x.values()) {
    v = domain == Domain::Unit ? rng.uniform() : 2.0 * rng.uniform() - 1.0;
  }
  return x;
}

// |a - n| <= 1e-3 * max(|a|, |n|), with a floor for gradients that vanish.
bool close_relative(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return std::abs(analytic - numeric) <= 1e-3 * scale + 1e-8;
}

double cross_entropy(const ToyClassifier& c, const ImageTensor& x, int label) {
  return -std::log(c.predict_probs(x)[label]);
}

double eps_mse(const ToyNoisePredictor& m, const ImageTensor& x_t, int t,
               const ImageTensor& target) {
  const ImageTensor e = m.predict_eps(x_t, t);
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) s += (e[i] - target[i]) * (e[i] - target[i]);
  return s / static_cast<double>(e.size());
}

LabeledDataset shapes(int per_class, std::uint64_t seed, Split split = Split::Train) {
  ShapeDatasetSpec spec;
  spec.per_class_count = per_class;
  spec.seed = seed;
  spec.split = split;
  return generate_shape_dataset(spec);
}

constexpr double kH = 1e-3;

}  // namespace

TEST_SUITE("models") {

TEST_CASE("softmax outputs are a distribution") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ToyClassifier c = ToyClassifier::initialized(3, 6, seed);
    const auto p = c.predict_probs(random_image(seed + 10, 8, 3, Domain::Unit));
    REQUIRE(p.size() == 6);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("classifier parameter gradient matches central differences") {
  ToyClassifier c = ToyClassifier::initialized(1, 4, 21);
  const ImageTensor x = random_image(22, 8, 1, Domain::Unit);
  const int label = 2;
  std::vector<double> grad(c.params().size(), 0.0);
  c.accumulate_gradient(x, label, grad);

  SeededRng pick(23);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t i = pick.below(c.params().size());
    const double saved = c.params()[i];
    c.params()[i] = saved + kH;
    const double up = cross_entropy(c, x, label);
    c.params()[i] = saved - kH;
    const double down = cross_entropy(c, x, label);
    c.params()[i] = saved;
    const double numeric = (up - down) / (2 * kH);
    CHECK_MESSAGE(close_relative(grad[i], numeric), "param ", i, ": ", grad[i], " vs ", numeric);
  }
}

TEST_CASE("classifier input gradient matches central differences") {
  const ToyClassifier c = ToyClassifier::initialized(3, 4, 31);
  ImageTensor x = random_image(32, 8, 3, Domain::Unit);
  for (int k = 0; k < 4; ++k) {
    const ImageTensor g = classifier_input_gradient(c, x, k);
    CHECK(g.same_shape(x));
    SeededRng pick(33 + k);
    for (int trial = 0; trial < 6; ++trial) {
      const std::size_t i = pick.below(x.size());
      const double saved = x[i];
      x[i] = saved + kH;
      const double up = std::log(c.predict_probs(x)[k]);
      x[i] = saved - kH;
      const double down = std::log(c.predict_probs(x)[k]);
      x[i] = saved;
      const double numeric = (up - down) / (2 * kH);
      CHECK_MESSAGE(close_relative(g[i], numeric), "pixel ", i, ": ", g[i], " vs ", numeric);
    }
  }
}

TEST_CASE("zero dense weights give a zero input gradient") {
  ToyClassifier c = ToyClassifier::initialized(1, 3, 41);
  for (auto& w : c.dense_weights()) w = 0.0;
  const ImageTensor g = classifier_input_gradient(c, random_image(42, 8, 1, Domain::Unit), 1);
  for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("classifier rejects out-of-range classes and wrong channels") {
  const ToyClassifier c = ToyClassifier::initialized(1, 3, 1);
  const ImageTensor x = random_image(2, 8, 1, Domain::Unit);
  CHECK_THROWS_AS(classifier_input_gradient(c, x, 3), Error);
  CHECK_THROWS_AS(c.predict_probs(random_image(3, 8, 3, Domain::Unit)), Error);
}

TEST_CASE("noise predictor parameter gradient matches central differences") {
  ToyNoisePredictor m = ToyNoisePredictor::initialized(1, 51);
  const ImageTensor x_t = random_image(52, 6, 1, Domain::Signed);
  SeededRng rng(53);
  const ImageTensor target = sample_gaussian(rng, 6, 6, 1);
  const int t = 17;
  std::vector<double> grad(m.params().size(), 0.0);
  m.accumulate_gradient(x_t, t, target, grad);

  SeededRng pick(54);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t i = pick.below(m.params().size());
    const double saved = m.params()[i];
    m.params()[i] = saved + kH;
    const double up = eps_mse(m, x_t, t, target);
    m.params()[i] = saved - kH;
    const double down = eps_mse(m, x_t, t, target);
    m.params()[i] = saved;
    const double numeric = (up - down) / (2 * kH);
    CHECK_MESSAGE(close_relative(grad[i], numeric), "param ", i, ": ", grad[i], " vs ", numeric);
  }
}

TEST_CASE("noise predictor input gradient matches central differences") {
  const ToyNoisePredictor m = ToyNoisePredictor::initialized(3, 61);
  ImageTensor x_t = random_image(62, 5, 3, Domain::Signed);
  SeededRng rng(63);
  const ImageTensor target = sample_gaussian(rng, 5, 5, 3);
  const int t = 400;
  std::vector<double> grad(m.params().size(), 0.0);
  ImageTensor input_grad;
  m.accumulate_gradient(x_t, t, target, grad, &input_grad);
  REQUIRE(input_grad.same_shape(x_t));

  SeededRng pick(64);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t i = pick.below(x_t.size());
    const double saved = x_t[i];
    x_t[i] = saved + kH;
    const double up = eps_mse(m, x_t, t, target);
    x_t[i] = saved - kH;
    const double down = eps_mse(m, x_t, t, target);
    x_t[i] = saved;
    const double numeric = (up - down) / (2 * kH);
    CHECK_MESSAGE(close_relative(input_grad[i], numeric), "pixel ", i);
  }
}

TEST_CASE("noise predictor output keeps the input dims") {
  const ToyNoisePredictor m = ToyNoisePredictor::initialized(3, 1);
  const ImageTensor x = random_image(2, 7, 3, Domain::Signed);
  CHECK(m.predict_eps(x, 5).same_shape(x));
}

TEST_CASE("clean classifier reaches 95% validation accuracy in 20 epochs") {
  const LabeledDataset train = shapes(100, 71);
  const LabeledDataset val = shapes(50, 72, Split::Validation);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.02;
  cfg.seed = 73;
  const TrainedClassifier trained = train_classifier(train, cfg);
  CHECK(top1_accuracy(trained.model, val) >= 0.95);
  REQUIRE(trained.loss_trace.size() == 20);
  CHECK(trained.loss_trace.back() < trained.loss_trace.front());
  // Non-increasing up to 5% noise.
  for (std::size_t e = 1; e < trained.loss_trace.size(); ++e) {
    CHECK(trained.loss_trace[e] <= trained.loss_trace[e - 1] * 1.05 + 1e-9);
  }
}

TEST_CASE("zero learning rate leaves weights unchanged") {
  const LabeledDataset train = shapes(5, 81);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.seed = 82;
  cfg.optimizer = Optimizer::Sgd;
  const TrainedClassifier trained = train_classifier(train, cfg);
  const ToyClassifier init = ToyClassifier::initialized(1, 4, derive_seed(82, Stream::WeightInit));
  for (std::size_t i = 0; i < init.params().size(); ++i) {
    CHECK(trained.model.params()[i] == static_cast<double>(static_cast<float>(init.params()[i])));
  }
  CHECK(trained.loss_trace[0] == doctest::Approx(trained.loss_trace[2]).epsilon(1e-12));
}

TEST_CASE("a single sample is fitted") {
  LabeledDataset one = shapes(1, 91);
  one.images.resize(1);
  one.labels.resize(1);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.05;
  cfg.seed = 92;
  CHECK(top1_accuracy(train_classifier(one, cfg).model, one) == 1.0);
}

TEST_CASE("training is deterministic per seed") {
  const LabeledDataset train = shapes(10, 101);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 102;
  CHECK(train_classifier(train, cfg).model == train_classifier(train, cfg).model);
  const DiffusionSchedule s = make_linear_schedule(100, 1e-4, 0.02);
  CHECK(train_noise_predictor(train, s, cfg).model == train_noise_predictor(train, s, cfg).model);
}

TEST_CASE("cosine decay starts at the full rate") {
  const LabeledDataset train = shapes(10, 103);
  TrainConfig plain;
  plain.epochs = 1;
  plain.seed = 104;
  TrainConfig decayed = plain;
  decayed.cosine_decay = true;
  // The first epoch runs at the full rate, so one epoch is unchanged.
  CHECK(train_classifier(train, plain).model == train_classifier(train, decayed).model);
  plain.epochs = decayed.epochs = 3;
  CHECK(!(train_classifier(train, plain).model == train_classifier(train, decayed).model));
  const DiffusionSchedule s = make_linear_schedule(100, 1e-4, 0.02);
  CHECK(!(train_noise_predictor(train, s, plain).model ==
          train_noise_predictor(train, s, decayed).model));
}

TEST_CASE("training validates its inputs") {
  LabeledDataset empty;
  empty.num_classes = 2;
  TrainConfig cfg;
  CHECK_THROWS_AS(train_classifier(empty, cfg), Error);
  const LabeledDataset train = shapes(2, 1);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train_classifier(train, cfg), Error);
  cfg = {};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(train_classifier(train, cfg), Error);
}

TEST_CASE("divergent training raises with the loss trace attached") {
  const LabeledDataset train = shapes(10, 111);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 1e200;
  cfg.optimizer = Optimizer::Sgd;
  cfg.seed = 112;
  try {
    train_classifier(train, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.kind() == ErrorKind::TrainingDiverged);
    CHECK(!e.loss_trace().empty());
  }
}

TEST_CASE("denoiser halves its probe loss on 400 images with T = 100") {
  const LabeledDataset train = shapes(100, 121);
  const DiffusionSchedule s = make_linear_schedule(100, 1e-4, 0.02);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 0.005;
  cfg.seed = 122;
  const TrainedNoisePredictor d = train_noise_predictor(train, s, cfg);
  CHECK(d.loss_trace.size() == 30);
  CHECK(d.final_loss <= 0.5 * d.initial_loss);
  CHECK(d.loss_trace.back() < d.loss_trace.front());
}

TEST_CASE("zero-epoch denoiser keeps its initial weights") {
  const LabeledDataset train = shapes(2, 131);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 132;
  const TrainedNoisePredictor d =
      train_noise_predictor(train, make_linear_schedule(10, 1e-4, 0.02), cfg);
  CHECK(d.loss_trace.empty());
  const ToyNoisePredictor init =
      ToyNoisePredictor::initialized(1, derive_seed(132, Stream::WeightInit));
  for (std::size_t i = 0; i < init.params().size(); ++i) {
    CHECK(d.model.params()[i] == static_cast<double>(static_cast<float>(init.params()[i])));
  }
}

TEST_CASE("trojan training meets its quality contract") {
  const LabeledDataset train = shapes(200, 141);
  const LabeledDataset val = shapes(25, 142, Split::Validation);
  const TriggerSpec trigger = make_badnet_trigger(16, 1, 3, Corner::BottomRight, 0);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 0.02;
  cfg.poison_fraction = 0.2;
  cfg.seed = 143;
  const TrainedClassifier t = train_trojan_classifier(train, val, trigger, cfg);
  CHECK(t.clean_accuracy >= kTrojanMinCleanAccuracy);
  CHECK(t.attack_success >= kTrojanMinAttackSuccess);
  CHECK(t.attempts >= 1);
  CHECK(t.attempts <= kTrojanAttempts);
}

TEST_CASE("zero poison fraction reduces to clean training") {
  const LabeledDataset train = shapes(10, 151);
  const LabeledDataset val = shapes(5, 152, Split::Validation);
  const TriggerSpec trigger = make_badnet_trigger(16, 1, 3, Corner::BottomRight, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.poison_fraction = 0.0;
  cfg.seed = 153;
  CHECK(train_trojan_classifier(train, val, trigger, cfg).model ==
        train_classifier(train, cfg).model);
}

TEST_CASE("full poisoning predicts the target on triggered inputs") {
  const LabeledDataset train = shapes(25, 161);
  const LabeledDataset val = shapes(10, 162, Split::Validation);
  const TriggerSpec trigger = make_badnet_trigger(16, 1, 3, Corner::BottomRight, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.poison_fraction = 1.0;
  cfg.seed = 163;
  // Clean accuracy collapses, so the quality contract fails after its retries.
  try {
    train_trojan_classifier(train, val, trigger, cfg);
    FAIL("expected a trojan quality failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TrojanQuality);
  }
  const LabeledDataset poisoned = poison_dataset(train, trigger, 1.0, cfg.seed);
  const ToyClassifier c = train_classifier(poisoned, cfg).model;
  CHECK(top1_accuracy(c, poison_all(val, trigger)) >= 0.99);
  CHECK(top1_accuracy(c, val) <= 0.35);
}

TEST_CASE("analytic denoiser closed form and limits") {
  const DiffusionSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  ImageTensor mu0(1, 2, 1, {0.3, -0.2}, Domain::Signed);
  const AnalyticGaussianDenoiser d(mu0, 0.25, s);
  ImageTensor x_t(1, 2, 1, {0.5, 0.1}, Domain::Signed);
  const int t = 300;
  const double ab = s.alpha_bar[t];
  const ImageTensor e = analytic_eps(d, x_t, t);
  for (int i = 0; i < 2; ++i) {
    const double expected = (x_t[i] - std::sqrt(ab) * mu0[i]) * std::sqrt(1 - ab) /
                            (ab * 0.25 + 1 - ab);
    CHECK(e[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  // Zero mean and zero input give zero noise.
  const AnalyticGaussianDenoiser zero(ImageTensor(1, 1, 1, Domain::Signed), 0.25, s);
  CHECK(analytic_eps(zero, ImageTensor(1, 1, 1, Domain::Signed), t)[0] == 0.0);
  // A vanishing data variance attributes all of x_t to noise.
  const AnalyticGaussianDenoiser point(ImageTensor(1, 1, 1, Domain::Signed), 1e-12, s);
  ImageTensor one(1, 1, 1, {0.7}, Domain::Signed);
  CHECK(analytic_eps(point, one, t)[0] == doctest::Approx(0.7 / std::sqrt(1 - ab)).epsilon(1e-6));
  CHECK_THROWS_AS(AnalyticGaussianDenoiser(mu0, 0.0, s), Error);
}

TEST_CASE("analytic denoiser matches a Monte-Carlo posterior mean") {
  // Sample (x0, eps) jointly, keep draws whose x_t lands in a narrow bin, and
  // compare the mean eps with the closed form at the bin centre.
  const DiffusionSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  const int t = 200;
  const double ab = s.alpha_bar[t];
  const double mu = 0.2, var = 0.25;
  const double centre = 0.4, half_width = 0.01;
  SeededRng rng(171);
  double sum = 0.0, sq = 0.0;
  long hits = 0;
  for (long i = 0; hits < 100000 && i < 200000000; ++i) {
    const double x0 = mu + std::sqrt(var) * rng.normal();
    const double eps = rng.normal();
    const double x_t = std::sqrt(ab) * x0 + std::sqrt(1 - ab) * eps;
    if (std::abs(x_t - centre) > half_width) continue;
    sum += eps;
    sq += eps * eps;
    ++hits;
  }
  REQUIRE(hits == 100000);
  const double mean = sum / hits;
  const double se = std::sqrt((sq / hits - mean * mean) / hits);
  const AnalyticGaussianDenoiser d(ImageTensor(1, 1, 1, {mu}, Domain::Signed), var, s);
  const double expected = analytic_eps(d, ImageTensor(1, 1, 1, {centre}, Domain::Signed), t)[0];
  CHECK(std::abs(mean - expected) <= 3 * se);
}

TEST_CASE("weight files round trip and reject the wrong architecture") {
  testutil::TempDir dir;
  const ToyClassifier c = ToyClassifier::initialized(3, 5, 181);
  write_classifier(dir.path / "c.snmw", c);
  const ToyClassifier c2 = read_classifier(dir.path / "c.snmw");
  CHECK(c2.num_classes() == 5);
  for (std::size_t i = 0; i < c.params().size(); ++i) {
    CHECK(c2.params()[i] == static_cast<double>(static_cast<float>(c.params()[i])));
  }
  const ToyNoisePredictor m = ToyNoisePredictor::initialized(1, 182);
  write_noise_predictor(dir.path / "m.snmw", m);
  CHECK(read_noise_predictor(dir.path / "m.snmw").params().size() == m.params().size());
  try {
    read_noise_predictor(dir.path / "c.snmw");
    FAIL("expected an architecture error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadMagic);
  }
}

}  // TEST_SUITE
