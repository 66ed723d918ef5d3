#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sancdifi/datagen.hpp"
#include "sancdifi/schedule.hpp"
#include "sancdifi/tensor.hpp"

namespace sancdifi {

struct TriggerSpec;

/// Black-box classifier: unit-domain image in, class probabilities out.
class ClassifierInterface {
 public:
  virtual ~ClassifierInterface() = default;
  virtual int num_classes() const = 0;
  /// Nonnegative, sums to 1.
  virtual std::vector<double> predict_probs(const ImageTensor& x) const = 0;
};

/// Classifiers that additionally expose d log p_k / dx.
class GradientClassifier : public ClassifierInterface {
 public:
  virtual ImageTensor input_gradient(const ImageTensor& x, int k) const = 0;
};

/// Predicts the noise component of a signed-domain x_t at schedule index t.
class NoisePredictorInterface {
 public:
  virtual ~NoisePredictorInterface() = default;
  virtual ImageTensor predict_eps(const ImageTensor& x_t, int t) const = 0;
};

int argmax(std::span<const double> values);

// ---------------------------------------------------------------------------
// Toy classifier: conv3x3(C -> 8, same padding) -> relu -> global average
// pool -> dense(8 -> K) -> softmax.

class ToyClassifier final : public GradientClassifier {
 public:
  static constexpr int kHidden = 8;

  ToyClassifier() = default;
  /// All-zero weights.
  ToyClassifier(int channels, int classes);
  /// He-style random initialisation.
  static ToyClassifier initialized(int channels, int classes, std::uint64_t seed);

  int num_classes() const override { return classes_; }
  int channels() const noexcept { return channels_; }
  std::vector<double> predict_probs(const ImageTensor& x) const override;
  std::vector<double> logits(const ImageTensor& x) const;
  ImageTensor input_gradient(const ImageTensor& x, int k) const override;

  /// Cross-entropy of `label`; adds d loss / d params into `grad`.
  double accumulate_gradient(const ImageTensor& x, int label, std::span<double> grad) const;

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::span<const double> conv_weights() const;
  std::span<double> dense_weights();
  std::span<double> dense_bias();

  friend bool operator==(const ToyClassifier& a, const ToyClassifier& b) {
    return a.channels_ == b.channels_ && a.classes_ == b.classes_ && a.params_ == b.params_;
  }

 private:
  std::size_t conv_w_size() const noexcept { return std::size_t(kHidden) * channels_ * 9; }
  const double* conv_w() const noexcept { return params_.data(); }
  const double* conv_b() const noexcept { return conv_w() + conv_w_size(); }
  const double* dense_w() const noexcept { return conv_b() + kHidden; }
  const double* dense_b() const noexcept { return dense_w() + std::size_t(classes_) * kHidden; }

  struct Forward;
  Forward forward(const ImageTensor& x) const;
  void check_input(const ImageTensor& x) const;

  int channels_ = 0;
  int classes_ = 0;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Toy noise predictor: conv3x3(C -> 16) + time embedding -> relu ->
// conv3x3(16 -> C). The time embedding is a learned 16x16 projection of a
// sinusoidal encoding of t, added to every pixel of the hidden layer.

class ToyNoisePredictor final : public NoisePredictorInterface {
 public:
  static constexpr int kHidden = 16;
  static constexpr int kEmbed = 16;

  ToyNoisePredictor() = default;
  ToyNoisePredictor(int channels);
  static ToyNoisePredictor initialized(int channels, std::uint64_t seed);

  int channels() const noexcept { return channels_; }
  ImageTensor predict_eps(const ImageTensor& x_t, int t) const override;

  /// Mean squared error against `target`; adds d loss / d params into
  /// `grad`. When `input_grad` is non-null it receives d loss / d x_t.
  double accumulate_gradient(const ImageTensor& x_t, int t, const ImageTensor& target,
                             std::span<double> grad, ImageTensor* input_grad = nullptr) const;

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  friend bool operator==(const ToyNoisePredictor& a, const ToyNoisePredictor& b) {
    return a.channels_ == b.channels_ && a.params_ == b.params_;
  }

 private:
  std::size_t conv1_w_size() const noexcept { return std::size_t(kHidden) * channels_ * 9; }
  std::size_t conv2_w_size() const noexcept { return std::size_t(channels_) * kHidden * 9; }
  const double* conv1_w() const noexcept { return params_.data(); }
  const double* conv1_b() const noexcept { return conv1_w() + conv1_w_size(); }
  const double* temb_w() const noexcept { return conv1_b() + kHidden; }
  const double* conv2_w() const noexcept { return temb_w() + kHidden * kEmbed; }
  const double* conv2_b() const noexcept { return conv2_w() + conv2_w_size(); }

  int channels_ = 0;
  std::vector<double> params_;
};

std::vector<double> timestep_embedding(int t, int dim);

// ---------------------------------------------------------------------------
// Closed-form denoiser for x_0 ~ N(mu0, var0 I):
//   E[eps | x_t] = (x_t - sqrt(ab) mu0) sqrt(1 - ab) / (ab var0 + 1 - ab)

class AnalyticGaussianDenoiser final : public NoisePredictorInterface {
 public:
  AnalyticGaussianDenoiser(ImageTensor mu0, double var0, DiffusionSchedule schedule);

  ImageTensor predict_eps(const ImageTensor& x_t, int t) const override;

  const ImageTensor& mean() const noexcept { return mu0_; }
  double variance() const noexcept { return var0_; }

 private:
  ImageTensor mu0_;
  double var0_;
  DiffusionSchedule schedule_;
};

ImageTensor analytic_eps(const AnalyticGaussianDenoiser& d, const ImageTensor& x_t, int t);

// ---------------------------------------------------------------------------
// Training

enum class Optimizer : std::uint8_t { Sgd = 0, Adam = 1 };

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  bool cosine_decay = false;  // anneal the rate to zero over the epochs
  // Trojan training only.
  double poison_fraction = 0.1;
  int target_label = 0;
};

struct TrainedClassifier {
  ToyClassifier model;
  std::vector<double> loss_trace;  // mean cross-entropy per epoch
  int attempts = 1;
  double clean_accuracy = 0.0;     // filled by the trojan trainer
  double attack_success = 0.0;
};

struct TrainedNoisePredictor {
  ToyNoisePredictor model;
  std::vector<double> loss_trace;  // mean epsilon-MSE per epoch
  double initial_loss = 0.0;       // probe-set loss before any update
  double final_loss = 0.0;         // same probe set after training
};

TrainedClassifier train_classifier(const LabeledDataset& data, const TrainConfig& cfg);

/// Poisons cfg.poison_fraction of `data` with `trigger` (labels set to the
/// target) and trains. With a positive fraction the result must reach 90%
/// clean accuracy and 95% attack success on `validation`; up to three
/// attempts with fresh seeds, then ErrorKind::TrojanQuality.
TrainedClassifier train_trojan_classifier(const LabeledDataset& data,
                                          const LabeledDataset& validation,
                                          const TriggerSpec& trigger, const TrainConfig& cfg);

inline constexpr double kTrojanMinCleanAccuracy = 0.90;
inline constexpr double kTrojanMinAttackSuccess = 0.95;
inline constexpr int kTrojanAttempts = 3;

/// d(log p_k)/dx by backpropagation.
ImageTensor classifier_input_gradient(const ToyClassifier& c, const ImageTensor& x, int k);

/// Simplified epsilon-prediction objective with t uniform in [0, T).
/// `data` is in the unit domain; images are converted to signed internally.
TrainedNoisePredictor train_noise_predictor(const LabeledDataset& data,
                                            const DiffusionSchedule& schedule,
                                            const TrainConfig& cfg);

double top1_accuracy(const ClassifierInterface& f, const LabeledDataset& data);

// ---------------------------------------------------------------------------
// SNMW weight files: magic, version u8, architecture u8, u32 channels,
// u32 classes (0 for the noise predictor), u32 hidden, u32 parameter count,
// then little-endian f32 parameters.

enum class Architecture : std::uint8_t { ToyClassifier = 1, ToyNoisePredictor = 2 };
inline constexpr std::uint8_t kWeightFormatVersion = 1;

void write_classifier(const std::filesystem::path& path, const ToyClassifier& model);
ToyClassifier read_classifier(const std::filesystem::path& path);
void write_noise_predictor(const std::filesystem::path& path, const ToyNoisePredictor& model);
ToyNoisePredictor read_noise_predictor(const std::filesystem::path& path);

}  // namespace sancdifi
