#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arp/renderer.hpp"

namespace arp {

enum class SignClass { Stop, SL25, SL35, SL65, Yield, Background };

inline constexpr int kInputSide = 32;
inline constexpr int kPixelFeatures = kInputSide * kInputSide * 3;
inline constexpr int kHistBins = 8;
inline constexpr int kFeatureCount = kPixelFeatures + 3 * kHistBins;

const char* class_name(SignClass c);
SignClass class_from_name(const std::string& name);
const std::vector<SignClass>& all_classes();
/// Sign geometry for a sign class; throws InvalidArgument for Background.
SignSpec sign_for_class(SignClass c);
SignClass class_for_sign(const SignSpec& sign);

/// Display-referred linear input: clamp(exposure * radiance), area-averaged
/// to 32x32, channel-interleaved, row-major.
std::vector<double> classifier_input(const RenderedImage& image);
/// Pixels followed by per-channel 8-bin histograms (fractions).
Eigen::VectorXd features_from_input(const std::vector<double>& input);

/// Anything that maps an image to a probability vector over `classes()`.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual const std::vector<SignClass>& classes() const = 0;
  virtual std::vector<double> scores(const RenderedImage& image) const = 0;
  std::size_t index_of(SignClass c) const;
};

struct DetectionDecision {
  bool detected = false;
  SignClass cls = SignClass::Background;
  double confidence = 0.0;
  bool attack_success = false;
};

inline constexpr double kDetectionThreshold = 0.3;

/// detected = max confidence >= threshold; attack success = argmax differs from
/// the true class or the sign goes undetected.
DetectionDecision decide(const std::vector<double>& probs, const std::vector<SignClass>& classes,
                         SignClass true_class, double threshold = kDetectionThreshold);
DetectionDecision detect(const Scorer& model, const RenderedImage& image, SignClass true_class,
                         double threshold = kDetectionThreshold);
double confidence(const Scorer& model, const RenderedImage& image, SignClass true_class);

/// Multinomial logistic regression parameters.
struct LogisticParams {
  Eigen::MatrixXd W;  // classes x features
  Eigen::VectorXd b;
};

/// Mean soft-target cross-entropy plus 0.5 * l2 * |W|^2, with gradient.
double softmax_loss(const LogisticParams& p, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double l2,
                    LogisticParams* grad);
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

struct TrainOptions {
  int per_class = 240;  // rendered crops per class
  int noise_images = 160;  // uniform-noise crops with uniform targets
  double held_out_fraction = 0.2;
  int epochs = 300;
  double step = 1.0;  // in units of 1 / (Lipschitz bound of the loss)
  double momentum = 0.9;
  double l2 = 1e-3;
  int max_restarts = 4;
  EotConfig eot{};
};

struct Dataset {
  Eigen::MatrixXd X;  // samples x features
  Eigen::MatrixXd Y;  // samples x classes (soft targets)
  std::vector<int> labels;  // -1 for soft-target rows
};

class SurrogateModel : public Scorer {
 public:
  SurrogateModel() = default;
  /// Rows of `params` act on centered features f - mean.
  SurrogateModel(std::vector<SignClass> classes, LogisticParams params, Eigen::VectorXd mean);

  const std::vector<SignClass>& classes() const override { return classes_; }
  std::vector<double> scores(const RenderedImage& image) const override;
  std::vector<double> predict_input(const std::vector<double>& input) const;
  std::vector<double> predict_features(const Eigen::VectorXd& f) const;

  const LogisticParams& params() const { return params_; }
  const Eigen::VectorXd& feature_mean() const { return mean_; }
  double accuracy(const Dataset& d) const;

  int epochs = 0;
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double final_loss = 0.0;

  void save_json(const std::string& path) const;
  static SurrogateModel load_json(const std::string& path);

 private:
  std::vector<SignClass> classes_;
  LogisticParams params_;
  Eigen::VectorXd mean_;
};

/// Full-batch gradient descent with momentum. Restarts with half the step on
/// non-finite loss; throws TrainingDiverged after max_restarts.
SurrogateModel fit_logistic(const Dataset& train, const std::vector<SignClass>& classes, const TrainOptions& opt,
                            std::uint64_t seed);

/// Benign EoT renders of every class (day, night, and night under dual and
/// camera-only filters) around the given base scenes. Background rows are
/// synthetic clutter crops.
Dataset build_dataset(const std::vector<SceneConfig>& scenes, const std::vector<SignClass>& classes, int per_class,
                      int noise_images, const EotConfig& eot, std::uint64_t seed,
                      const MaterialRegistry& registry = MaterialRegistry::builtin());

/// Builds a dataset, holds out a fraction for evaluation and trains.
/// final_accuracy holds the held-out accuracy.
SurrogateModel train_surrogate(const std::vector<SceneConfig>& scenes, const std::vector<SignClass>& classes,
                               std::uint64_t seed, const TrainOptions& opt = {});

}  // namespace arp
