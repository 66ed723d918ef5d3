#include "sancdifi/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "conv.hpp"
#include "sancdifi/attacks.hpp"
#include "sancdifi/error.hpp"
#include "sancdifi/io.hpp"

namespace sancdifi {

namespace {

void softmax_in_place(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (auto& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (auto& x : v) x /= sum;
}

void round_to_f32(std::span<double> values) {
  for (auto& v : values) v = static_cast<float>(v);
}

// Adam or momentum SGD over a flat parameter vector.
class ParamOptimizer {
 public:
  ParamOptimizer(Optimizer kind, double lr, std::size_t n)
      : kind_(kind), lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void set_learning_rate(double lr) { lr_ = lr; }

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    if (kind_ == Optimizer::Sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = 0.9 * m_[i] + grad[i];
        params[i] -= lr_ * m_[i];
      }
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, t_);
    const double c2 = 1.0 - std::pow(b2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
  }

 private:
  Optimizer kind_;
  double lr_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

double epoch_learning_rate(const TrainConfig& cfg, int epoch) {
  if (!cfg.cosine_decay) return cfg.learning_rate;
  const double pi = std::acos(-1.0);
  return 0.5 * cfg.learning_rate * (1.0 + std::cos(pi * epoch / cfg.epochs));
}

void check_train_config(const TrainConfig& cfg) {
  require(cfg.epochs >= 0, ErrorKind::InvalidArgument, "epochs must be >= 0");
  require(cfg.batch_size >= 1, ErrorKind::InvalidArgument, "batch_size must be >= 1");
  require(cfg.learning_rate >= 0.0 && std::isfinite(cfg.learning_rate),
          ErrorKind::InvalidArgument, "learning_rate must be finite and >= 0");
  require(cfg.poison_fraction >= 0.0 && cfg.poison_fraction <= 1.0,
          ErrorKind::InvalidArgument, "poison_fraction outside [0, 1]");
}

std::vector<std::size_t> shuffled(std::size_t n, SeededRng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

}  // namespace

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

// ---------------------------------------------------------------------------
// ToyClassifier

struct ToyClassifier::Forward {
  std::vector<double> pre;     // H*W*kHidden conv outputs before relu
  std::vector<double> act;     // after relu
  std::vector<double> pooled;  // kHidden
  std::vector<double> probs;   // K (logits before softmax_in_place)
};

ToyClassifier::ToyClassifier(int channels, int classes) : channels_(channels), classes_(classes) {
  require(channels >= 1 && classes >= 1, ErrorKind::InvalidArgument,
          "classifier needs positive channels and classes");
  params_.assign(conv_w_size() + kHidden + std::size_t(classes) * kHidden + classes, 0.0);
}

ToyClassifier ToyClassifier::initialized(int channels, int classes, std::uint64_t seed) {
  ToyClassifier c(channels, classes);
  SeededRng rng(seed);
  const double conv_scale = std::sqrt(2.0 / (9.0 * channels));
  const double dense_scale = std::sqrt(1.0 / kHidden);
  auto p = c.params_.begin();
  for (std::size_t i = 0; i < c.conv_w_size(); ++i) *p++ = conv_scale * rng.normal();
  p += kHidden;
  for (int i = 0; i < classes * kHidden; ++i) *p++ = dense_scale * rng.normal();
  round_to_f32(c.params_);
  return c;
}

void ToyClassifier::check_input(const ImageTensor& x) const {
  require(!params_.empty(), ErrorKind::InvalidArgument, "classifier has no weights");
  require(x.channels() == channels_, ErrorKind::DimensionMismatch,
          "classifier expects " + std::to_string(channels_) + " channels, got " +
              std::to_string(x.channels()));
}

ToyClassifier::Forward ToyClassifier::forward(const ImageTensor& x) const {
  check_input(x);
  const int h = x.height(), w = x.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Forward f;
  f.pre.resize(n * kHidden);
  detail::conv3x3_forward(x.values().data(), h, w, channels_, conv_w(), conv_b(), kHidden,
                          f.pre.data());
  f.act.resize(f.pre.size());
  f.pooled.assign(kHidden, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (int o = 0; o < kHidden; ++o) {
      const double a = std::max(0.0, f.pre[p * kHidden + o]);
      f.act[p * kHidden + o] = a;
      f.pooled[o] += a;
    }
  }
  for (auto& v : f.pooled) v /= static_cast<double>(n);
  f.probs.assign(classes_, 0.0);
  for (int k = 0; k < classes_; ++k) {
    double z = dense_b()[k];
    for (int o = 0; o < kHidden; ++o) z += dense_w()[k * kHidden + o] * f.pooled[o];
    f.probs[k] = z;
  }
  return f;
}

std::vector<double> ToyClassifier::logits(const ImageTensor& x) const { return forward(x).probs; }

std::vector<double> ToyClassifier::predict_probs(const ImageTensor& x) const {
  auto z = logits(x);
  softmax_in_place(z);
  return z;
}

namespace {

// Backpropagates d loss / d logits through dense, pool, relu and conv.
void classifier_backward(const ImageTensor& x, int channels, int classes, int hidden,
                         const double* conv_w, const double* dense_w,
                         const std::vector<double>& pre, const std::vector<double>& pooled,
                         const std::vector<double>& dlogits, double* grad, double* din) {
  const std::size_t n = static_cast<std::size_t>(x.height()) * x.width();
  const std::size_t conv_w_size = std::size_t(hidden) * channels * 9;
  std::vector<double> dpooled(hidden, 0.0);
  for (int k = 0; k < classes; ++k) {
    for (int o = 0; o < hidden; ++o) dpooled[o] += dense_w[k * hidden + o] * dlogits[k];
  }
  if (grad) {
    double* g_dense_w = grad + conv_w_size + hidden;
    double* g_dense_b = g_dense_w + std::size_t(classes) * hidden;
    for (int k = 0; k < classes; ++k) {
      for (int o = 0; o < hidden; ++o) g_dense_w[k * hidden + o] += dlogits[k] * pooled[o];
      g_dense_b[k] += dlogits[k];
    }
  }
  std::vector<double> dpre(pre.size(), 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (int o = 0; o < hidden; ++o) {
      if (pre[p * hidden + o] > 0.0) dpre[p * hidden + o] = dpooled[o] / static_cast<double>(n);
    }
  }
  detail::conv3x3_backward(x.values().data(), x.height(), x.width(), channels, conv_w, hidden,
                           dpre.data(), grad ? grad : nullptr,
                           grad ? grad + conv_w_size : nullptr, din);
}

}  // namespace

double ToyClassifier::accumulate_gradient(const ImageTensor& x, int label,
                                          std::span<double> grad) const {
  require(label >= 0 && label < classes_, ErrorKind::ClassOutOfRange, "label out of range");
  require(grad.size() == params_.size(), ErrorKind::DimensionMismatch, "gradient buffer size");
  Forward f = forward(x);
  softmax_in_place(f.probs);
  std::vector<double> dlogits = f.probs;
  dlogits[label] -= 1.0;
  classifier_backward(x, channels_, classes_, kHidden, conv_w(), dense_w(), f.pre, f.pooled,
                      dlogits, grad.data(), nullptr);
  return -std::log(std::max(f.probs[label], 1e-300));
}

ImageTensor ToyClassifier::input_gradient(const ImageTensor& x, int k) const {
  require(k >= 0 && k < classes_, ErrorKind::ClassOutOfRange,
          "class " + std::to_string(k) + " out of range");
  Forward f = forward(x);
  softmax_in_place(f.probs);
  std::vector<double> dlogits(classes_);
  for (int j = 0; j < classes_; ++j) dlogits[j] = (j == k ? 1.0 : 0.0) - f.probs[j];
  ImageTensor g(x.height(), x.width(), x.channels(), x.domain());
  classifier_backward(x, channels_, classes_, kHidden, conv_w(), dense_w(), f.pre, f.pooled,
                      dlogits, nullptr, g.values().data());
  return g;
}

std::span<const double> ToyClassifier::conv_weights() const {
  return std::span<const double>(params_).subspan(0, conv_w_size());
}

std::span<double> ToyClassifier::dense_weights() {
  return std::span<double>(params_).subspan(conv_w_size() + kHidden,
                                            std::size_t(classes_) * kHidden);
}

std::span<double> ToyClassifier::dense_bias() {
  return std::span<double>(params_).subspan(params_.size() - classes_, classes_);
}

ImageTensor classifier_input_gradient(const ToyClassifier& c, const ImageTensor& x, int k) {
  return c.input_gradient(x, k);
}

double top1_accuracy(const ClassifierInterface& f, const LabeledDataset& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto probs = f.predict_probs(data.images[i]);
    if (argmax(probs) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainedClassifier train_classifier(const LabeledDataset& data, const TrainConfig& cfg) {
  check_train_config(cfg);
  require(!data.empty(), ErrorKind::InvalidArgument, "cannot train on an empty dataset");
  data.validate();
  const int channels = data.images.front().channels();

  TrainedClassifier out;
  out.model = ToyClassifier::initialized(channels, data.num_classes,
                                         derive_seed(cfg.seed, Stream::WeightInit));
  auto params = out.model.params();
  ParamOptimizer opt(cfg.optimizer, cfg.learning_rate, params.size());
  SeededRng shuffle_rng(derive_seed(cfg.seed, Stream::TrainShuffle));
  std::vector<double> grad(params.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_learning_rate(epoch_learning_rate(cfg, epoch));
    const auto order = shuffled(data.size(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        total += out.model.accumulate_gradient(data.images[order[i]], data.labels[order[i]], grad);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grad) g *= scale;
      opt.step(params, grad);
    }
    const double mean = total / static_cast<double>(data.size());
    out.loss_trace.push_back(mean);
    if (!std::isfinite(mean) ||
        !std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); })) {
      throw TrainingDivergedError("classifier training diverged at epoch " +
                                      std::to_string(epoch),
                                  out.loss_trace);
    }
  }
  round_to_f32(params);
  return out;
}

TrainedClassifier train_trojan_classifier(const LabeledDataset& data,
                                          const LabeledDataset& validation,
                                          const TriggerSpec& trigger, const TrainConfig& cfg) {
  check_train_config(cfg);
  require(trigger.target_label >= 0 && trigger.target_label < data.num_classes,
          ErrorKind::ClassOutOfRange, "trojan target label out of range");
  TrainConfig attempt_cfg = cfg;
  attempt_cfg.target_label = trigger.target_label;
  if (cfg.poison_fraction == 0.0) {
    auto clean = train_classifier(data, attempt_cfg);
    clean.clean_accuracy = validation.empty() ? 0.0 : top1_accuracy(clean.model, validation);
    return clean;
  }
  const LabeledDataset attack_set = poison_all(validation, trigger);
  std::string last;
  for (int attempt = 0; attempt < kTrojanAttempts; ++attempt) {
    attempt_cfg.seed =
        attempt == 0 ? cfg.seed : derive_seed(cfg.seed, Stream::Retry, std::uint64_t(attempt));
    const LabeledDataset poisoned =
        poison_dataset(data, trigger, cfg.poison_fraction, attempt_cfg.seed);
    auto result = train_classifier(poisoned, attempt_cfg);
    result.attempts = attempt + 1;
    result.clean_accuracy = top1_accuracy(result.model, validation);
    result.attack_success = top1_accuracy(result.model, attack_set);
    if (result.clean_accuracy >= kTrojanMinCleanAccuracy &&
        result.attack_success >= kTrojanMinAttackSuccess) {
      return result;
    }
    last = "clean accuracy " + std::to_string(result.clean_accuracy) + ", attack success " +
           std::to_string(result.attack_success);
  }
  fail(ErrorKind::TrojanQuality, "trojan quality not met after " +
                                     std::to_string(kTrojanAttempts) + " attempts (" + last +
                                     ")");
}

// ---------------------------------------------------------------------------
// ToyNoisePredictor

std::vector<double> timestep_embedding(int t, int dim) {
  std::vector<double> e(static_cast<std::size_t>(dim));
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e[i] = std::sin(t * freq);
    e[half + i] = std::cos(t * freq);
  }
  return e;
}

ToyNoisePredictor::ToyNoisePredictor(int channels) : channels_(channels) {
  require(channels >= 1, ErrorKind::InvalidArgument, "noise predictor needs channels >= 1");
  params_.assign(conv1_w_size() + kHidden + kHidden * kEmbed + conv2_w_size() + channels, 0.0);
}

ToyNoisePredictor ToyNoisePredictor::initialized(int channels, std::uint64_t seed) {
  ToyNoisePredictor m(channels);
  SeededRng rng(seed);
  auto p = m.params_.begin();
  const double s1 = std::sqrt(2.0 / (9.0 * channels));
  for (std::size_t i = 0; i < m.conv1_w_size(); ++i) *p++ = s1 * rng.normal();
  p += kHidden;
  const double se = std::sqrt(1.0 / kEmbed);
  for (int i = 0; i < kHidden * kEmbed; ++i) *p++ = se * rng.normal();
  const double s2 = std::sqrt(1.0 / (9.0 * kHidden));
  for (std::size_t i = 0; i < m.conv2_w_size(); ++i) *p++ = s2 * rng.normal();
  round_to_f32(m.params_);
  return m;
}

namespace {

struct NoiseForward {
  std::vector<double> embed;  // kEmbed sinusoidal features
  std::vector<double> pre;    // H*W*kHidden before relu
  std::vector<double> act;
  std::vector<double> out;    // H*W*C
};

}  // namespace

ImageTensor ToyNoisePredictor::predict_eps(const ImageTensor& x_t, int t) const {
  ImageTensor out(x_t.height(), x_t.width(), x_t.channels(), Domain::Signed);
  require(!params_.empty(), ErrorKind::InvalidArgument, "noise predictor has no weights");
  require(x_t.channels() == channels_, ErrorKind::DimensionMismatch,
          "noise predictor channel mismatch");
  const int h = x_t.height(), w = x_t.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> pre(n * kHidden);
  detail::conv3x3_forward(x_t.values().data(), h, w, channels_, conv1_w(), conv1_b(), kHidden,
                          pre.data());
  const auto e = timestep_embedding(t, kEmbed);
  double shift[kHidden];
  for (int o = 0; o < kHidden; ++o) {
    double s = 0.0;
    for (int j = 0; j < kEmbed; ++j) s += temb_w()[o * kEmbed + j] * e[j];
    shift[o] = s;
  }
  for (std::size_t p = 0; p < n; ++p) {
    for (int o = 0; o < kHidden; ++o) {
      pre[p * kHidden + o] = std::max(0.0, pre[p * kHidden + o] + shift[o]);
    }
  }
  detail::conv3x3_forward(pre.data(), h, w, kHidden, conv2_w(), conv2_b(), channels_,
                          out.values().data());
  return out;
}

double ToyNoisePredictor::accumulate_gradient(const ImageTensor& x_t, int t,
                                              const ImageTensor& target, std::span<double> grad,
                                              ImageTensor* input_grad) const {
  require(x_t.same_shape(target), ErrorKind::DimensionMismatch, "target shape mismatch");
  require(grad.size() == params_.size(), ErrorKind::DimensionMismatch, "gradient buffer size");
  require(x_t.channels() == channels_, ErrorKind::DimensionMismatch,
          "noise predictor channel mismatch");
  const int h = x_t.height(), w = x_t.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;

  std::vector<double> pre(n * kHidden);
  detail::conv3x3_forward(x_t.values().data(), h, w, channels_, conv1_w(), conv1_b(), kHidden,
                          pre.data());
  const auto e = timestep_embedding(t, kEmbed);
  for (int o = 0; o < kHidden; ++o) {
    double s = 0.0;
    for (int j = 0; j < kEmbed; ++j) s += temb_w()[o * kEmbed + j] * e[j];
    for (std::size_t p = 0; p < n; ++p) pre[p * kHidden + o] += s;
  }
  std::vector<double> act(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) act[i] = std::max(0.0, pre[i]);
  std::vector<double> out(n * channels_);
  detail::conv3x3_forward(act.data(), h, w, kHidden, conv2_w(), conv2_b(), channels_,
                          out.data());

  const double count = static_cast<double>(out.size());
  double loss = 0.0;
  std::vector<double> dout(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double diff = out[i] - target[i];
    loss += diff * diff;
    dout[i] = 2.0 * diff / count;
  }

  double* g_conv1_w = grad.data();
  double* g_conv1_b = g_conv1_w + conv1_w_size();
  double* g_temb_w = g_conv1_b + kHidden;
  double* g_conv2_w = g_temb_w + kHidden * kEmbed;
  double* g_conv2_b = g_conv2_w + conv2_w_size();

  std::vector<double> dact(act.size(), 0.0);
  detail::conv3x3_backward(act.data(), h, w, kHidden, conv2_w(), channels_, dout.data(),
                           g_conv2_w, g_conv2_b, dact.data());
  std::vector<double> dshift(kHidden, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (int o = 0; o < kHidden; ++o) {
      const std::size_t i = p * kHidden + o;
      if (pre[i] <= 0.0) dact[i] = 0.0;
      dshift[o] += dact[i];
    }
  }
  for (int o = 0; o < kHidden; ++o) {
    for (int j = 0; j < kEmbed; ++j) g_temb_w[o * kEmbed + j] += dshift[o] * e[j];
  }
  double* din = nullptr;
  if (input_grad) {
    *input_grad = ImageTensor(h, w, channels_, x_t.domain());
    din = input_grad->values().data();
  }
  detail::conv3x3_backward(x_t.values().data(), h, w, channels_, conv1_w(), kHidden,
                           dact.data(), g_conv1_w, g_conv1_b, din);
  return loss / count;
}

namespace {

struct NoiseSample {
  std::size_t image;
  int t;
  ImageTensor eps;
};

ImageTensor noised(const ImageTensor& x0, const ImageTensor& eps, double alpha_bar) {
  ImageTensor x = x0;
  const double a = std::sqrt(alpha_bar), b = std::sqrt(1.0 - alpha_bar);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * x0[i] + b * eps[i];
  return x;
}

double probe_loss(const ToyNoisePredictor& model, const std::vector<ImageTensor>& signed_images,
                  const std::vector<NoiseSample>& probe, const DiffusionSchedule& schedule) {
  if (probe.empty()) return 0.0;
  std::vector<double> scratch(model.params().size());
  double total = 0.0;
  for (const auto& s : probe) {
    const ImageTensor x_t = noised(signed_images[s.image], s.eps, schedule.alpha_bar[s.t]);
    total += model.accumulate_gradient(x_t, s.t, s.eps, scratch);
  }
  return total / static_cast<double>(probe.size());
}

}  // namespace

TrainedNoisePredictor train_noise_predictor(const LabeledDataset& data,
                                            const DiffusionSchedule& schedule,
                                            const TrainConfig& cfg) {
  check_train_config(cfg);
  require(!data.empty(), ErrorKind::InvalidArgument, "cannot train on an empty dataset");
  require(schedule.steps >= 1, ErrorKind::InvalidArgument, "empty diffusion schedule");
  data.validate();

  std::vector<ImageTensor> images;
  images.reserve(data.size());
  for (const auto& img : data.images) {
    images.push_back(img.domain() == Domain::Signed ? img : convert_domain(img, Domain::Signed));
  }
  const ImageTensor& first = images.front();

  TrainedNoisePredictor out;
  out.model = ToyNoisePredictor::initialized(first.channels(),
                                             derive_seed(cfg.seed, Stream::WeightInit));

  // Fixed probe draws for the before/after comparison.
  std::vector<NoiseSample> probe;
  {
    SeededRng rng(derive_seed(cfg.seed, Stream::TrainNoise, 1));
    const std::size_t count = std::min<std::size_t>(256, images.size());
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t idx = rng.below(images.size());
      const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps)));
      probe.push_back({idx, t, sample_gaussian(rng, first.height(), first.width(),
                                               first.channels())});
    }
  }
  out.initial_loss = probe_loss(out.model, images, probe, schedule);

  auto params = out.model.params();
  ParamOptimizer opt(cfg.optimizer, cfg.learning_rate, params.size());
  SeededRng shuffle_rng(derive_seed(cfg.seed, Stream::TrainShuffle));
  SeededRng noise_rng(derive_seed(cfg.seed, Stream::TrainNoise));
  std::vector<double> grad(params.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_learning_rate(epoch_learning_rate(cfg, epoch));
    const auto order = shuffled(images.size(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        const ImageTensor& x0 = images[order[i]];
        const int t = static_cast<int>(noise_rng.below(static_cast<std::uint64_t>(schedule.steps)));
        const ImageTensor eps = sample_gaussian(noise_rng, x0.height(), x0.width(), x0.channels());
        const ImageTensor x_t = noised(x0, eps, schedule.alpha_bar[t]);
        total += out.model.accumulate_gradient(x_t, t, eps, grad);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grad) g *= scale;
      opt.step(params, grad);
    }
    const double mean = total / static_cast<double>(images.size());
    out.loss_trace.push_back(mean);
    if (!std::isfinite(mean)) {
      throw TrainingDivergedError("noise predictor training diverged at epoch " +
                                      std::to_string(epoch),
                                  out.loss_trace);
    }
  }
  round_to_f32(params);
  out.final_loss = probe_loss(out.model, images, probe, schedule);
  return out;
}

// ---------------------------------------------------------------------------
// AnalyticGaussianDenoiser

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(ImageTensor mu0, double var0,
                                                   DiffusionSchedule schedule)
    : mu0_(std::move(mu0)), var0_(var0), schedule_(std::move(schedule)) {
  require(var0 > 0.0, ErrorKind::InvalidArgument, "var0 must be positive");
}

ImageTensor AnalyticGaussianDenoiser::predict_eps(const ImageTensor& x_t, int t) const {
  require(t >= 0 && t < schedule_.steps, ErrorKind::InvalidArgument, "timestep out of range");
  require(x_t.same_shape(mu0_), ErrorKind::DimensionMismatch, "analytic denoiser shape mismatch");
  const double ab = schedule_.alpha_bar[t];
  const double coeff = std::sqrt(1.0 - ab) / (ab * var0_ + 1.0 - ab);
  const double scale = std::sqrt(ab);
  ImageTensor out(x_t.height(), x_t.width(), x_t.channels(), Domain::Signed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - scale * mu0_[i]) * coeff;
  return out;
}

ImageTensor analytic_eps(const AnalyticGaussianDenoiser& d, const ImageTensor& x_t, int t) {
  return d.predict_eps(x_t, t);
}

// ---------------------------------------------------------------------------
// Weight files

namespace {

void write_weights(const std::filesystem::path& path, Architecture arch, int channels,
                   int classes, int hidden, std::span<const double> params) {
  auto out = open_output(path);
  ByteWriter w(out);
  w.magic("SNMW");
  w.u8(kWeightFormatVersion);
  w.u8(static_cast<std::uint8_t>(arch));
  w.u32(static_cast<std::uint32_t>(channels));
  w.u32(static_cast<std::uint32_t>(classes));
  w.u32(static_cast<std::uint32_t>(hidden));
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (double v : params) w.f32(static_cast<float>(v));
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

struct WeightHeader {
  Architecture arch;
  int channels, classes, hidden;
  std::vector<double> params;
};

WeightHeader read_weights(const std::filesystem::path& path, Architecture expected) {
  auto in = open_input(path);
  ByteReader r(in);
  r.expect_magic("SNMW");
  const auto version = r.u8();
  require(version == kWeightFormatVersion, ErrorKind::BadVersion,
          "unsupported weight file version " + std::to_string(version));
  WeightHeader h;
  h.arch = static_cast<Architecture>(r.u8());
  require(h.arch == expected, ErrorKind::BadMagic,
          "weight file holds a different architecture: " + path.string());
  h.channels = static_cast<int>(r.u32());
  h.classes = static_cast<int>(r.u32());
  h.hidden = static_cast<int>(r.u32());
  const auto count = r.u32();
  require(h.channels >= 1 && h.channels <= 64 && h.classes <= 4096 && count < (1u << 26),
          ErrorKind::BadMagic, "implausible weight header");
  h.params.resize(count);
  for (auto& v : h.params) v = r.f32();
  return h;
}

}  // namespace

void write_classifier(const std::filesystem::path& path, const ToyClassifier& model) {
  write_weights(path, Architecture::ToyClassifier, model.channels(), model.num_classes(),
                ToyClassifier::kHidden, model.params());
}

ToyClassifier read_classifier(const std::filesystem::path& path) {
  auto h = read_weights(path, Architecture::ToyClassifier);
  require(h.hidden == ToyClassifier::kHidden && h.classes >= 1, ErrorKind::BadMagic,
          "classifier layer dims do not match this build");
  ToyClassifier model(h.channels, h.classes);
  require(model.params().size() == h.params.size(), ErrorKind::BadMagic,
          "classifier parameter count mismatch");
  std::copy(h.params.begin(), h.params.end(), model.params().begin());
  return model;
}

void write_noise_predictor(const std::filesystem::path& path, const ToyNoisePredictor& model) {
  write_weights(path, Architecture::ToyNoisePredictor, model.channels(), 0,
                ToyNoisePredictor::kHidden, model.params());
}

ToyNoisePredictor read_noise_predictor(const std::filesystem::path& path) {
  auto h = read_weights(path, Architecture::ToyNoisePredictor);
  require(h.hidden == ToyNoisePredictor::kHidden, ErrorKind::BadMagic,
          "noise predictor layer dims do not match this build");
  ToyNoisePredictor model(h.channels);
  require(model.params().size() == h.params.size(), ErrorKind::BadMagic,
          "noise predictor parameter count mismatch");
  std::copy(h.params.begin(), h.params.end(), model.params().begin());
  return model;
}

}  // namespace sancdifi
