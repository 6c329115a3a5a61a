#include "arp/tsr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "arp/error.hpp"
#include "arp/rng.hpp"

namespace arp {

const char* class_name(SignClass c) {
  switch (c) {
    case SignClass::Stop: return "STOP";
    case SignClass::SL25: return "SL25";
    case SignClass::SL35: return "SL35";
    case SignClass::SL65: return "SL65";
    case SignClass::Yield: return "YIELD";
    case SignClass::Background: return "BACKGROUND";
  }
  return "?";
}

SignClass class_from_name(const std::string& name) {
  for (SignClass c : all_classes())
    if (name == class_name(c)) return c;
  throw InvalidArgument("unknown sign class '" + name + "'");
}

const std::vector<SignClass>& all_classes() {
  static const std::vector<SignClass> v{SignClass::Stop, SignClass::SL25,  SignClass::SL35,
                                        SignClass::SL65, SignClass::Yield, SignClass::Background};
  return v;
}

SignSpec sign_for_class(SignClass c) {
  switch (c) {
    case SignClass::Stop: return SignSpec::stop();
    case SignClass::SL25: return SignSpec::speed_limit(25);
    case SignClass::SL35: return SignSpec::speed_limit(35);
    case SignClass::SL65: return SignSpec::speed_limit(65);
    case SignClass::Yield: return SignSpec::yield();
    case SignClass::Background: break;
  }
  throw InvalidArgument("BACKGROUND has no sign geometry");
}

SignClass class_for_sign(const SignSpec& sign) {
  switch (sign.kind) {
    case SignKind::Stop: return SignClass::Stop;
    case SignKind::Yield: return SignClass::Yield;
    case SignKind::SpeedLimit:
      if (sign.speed == 25) return SignClass::SL25;
      if (sign.speed == 35) return SignClass::SL35;
      if (sign.speed == 65) return SignClass::SL65;
      break;
  }
  throw InvalidArgument("sign " + sign.label() + " has no class");
}

namespace {

// Overlap weights of source cells [i, i+1) with output cell k of n over a
// source extent of `len` pixels.
std::vector<std::vector<std::pair<int, double>>> box_weights(int len, int n) {
  std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(n));
  const double scale = static_cast<double>(len) / n;
  for (int k = 0; k < n; ++k) {
    const double a = k * scale, b = (k + 1) * scale;
    for (int i = static_cast<int>(std::floor(a)); i < static_cast<int>(std::ceil(b)) && i < len; ++i) {
      const double w = std::min(b, i + 1.0) - std::max(a, static_cast<double>(i));
      if (w > 0.0) out[static_cast<std::size_t>(k)].emplace_back(i, w / scale);
    }
  }
  return out;
}

}  // namespace

std::vector<double> classifier_input(const RenderedImage& image) {
  if (image.width <= 0 || image.height <= 0) throw InvalidArgument("empty image");
  const auto wx = box_weights(image.width, kInputSide);
  const auto wy = box_weights(image.height, kInputSide);
  std::vector<double> out(kPixelFeatures, 0.0);
  for (int oy = 0; oy < kInputSide; ++oy) {
    for (int ox = 0; ox < kInputSide; ++ox) {
      Rgb acc{};
      for (const auto& [sy, fy] : wy[static_cast<std::size_t>(oy)])
        for (const auto& [sx, fx] : wx[static_cast<std::size_t>(ox)])
          acc += clamp01(image.at(sx, sy) * image.exposure) * (fx * fy);
      const std::size_t i = (static_cast<std::size_t>(oy) * kInputSide + ox) * 3;
      out[i] = acc.r;
      out[i + 1] = acc.g;
      out[i + 2] = acc.b;
    }
  }
  return out;
}

Eigen::VectorXd features_from_input(const std::vector<double>& input) {
  if (input.size() != static_cast<std::size_t>(kPixelFeatures)) throw InvalidArgument("classifier input must be 32x32x3");
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureCount);
  const double unit = 1.0 / (kInputSide * kInputSide);
  for (int i = 0; i < kPixelFeatures; ++i) {
    const double v = std::clamp(input[static_cast<std::size_t>(i)], 0.0, 1.0);
    f[i] = v;
    const int bin = std::min(kHistBins - 1, static_cast<int>(v * kHistBins));
    f[kPixelFeatures + (i % 3) * kHistBins + bin] += unit;
  }
  return f;
}

std::size_t Scorer::index_of(SignClass c) const {
  const auto& cl = classes();
  const auto it = std::find(cl.begin(), cl.end(), c);
  if (it == cl.end()) throw InvalidArgument(std::string("class ") + class_name(c) + " not handled by the model");
  return static_cast<std::size_t>(it - cl.begin());
}

DetectionDecision decide(const std::vector<double>& probs, const std::vector<SignClass>& classes,
                         SignClass true_class, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  if (probs.size() != classes.size() || probs.empty()) throw InvalidArgument("probability vector size mismatch");
  const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  DetectionDecision d;
  d.cls = classes[best];
  d.confidence = probs[best];
  d.detected = d.confidence >= threshold;
  d.attack_success = d.cls != true_class || !d.detected;
  return d;
}

DetectionDecision detect(const Scorer& model, const RenderedImage& image, SignClass true_class, double threshold) {
  return decide(model.scores(image), model.classes(), true_class, threshold);
}

double confidence(const Scorer& model, const RenderedImage& image, SignClass true_class) {
  return model.scores(image)[model.index_of(true_class)];
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

double softmax_loss(const LogisticParams& p, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double l2,
                    LogisticParams* grad) {
  const auto n = static_cast<double>(X.rows());
  Eigen::MatrixXd logits = X * p.W.transpose();
  logits.rowwise() += p.b.transpose();
  Eigen::MatrixXd logp = logits;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double m = logp.row(i).maxCoeff();
    const double lse = m + std::log((logp.row(i).array() - m).exp().sum());
    logp.row(i).array() -= lse;
  }
  const double loss = -(Y.array() * logp.array()).sum() / n + 0.5 * l2 * p.W.squaredNorm();
  if (grad) {
    const Eigen::MatrixXd d = (logp.array().exp().matrix() - Y) / n;
    grad->W = d.transpose() * X + l2 * p.W;
    grad->b = d.colwise().sum().transpose();
  }
  return loss;
}

SurrogateModel::SurrogateModel(std::vector<SignClass> classes, LogisticParams params, Eigen::VectorXd mean)
    : classes_(std::move(classes)), params_(std::move(params)), mean_(std::move(mean)) {
  if (params_.W.rows() != static_cast<Eigen::Index>(classes_.size()) || params_.W.cols() != kFeatureCount ||
      params_.b.size() != params_.W.rows() || mean_.size() != kFeatureCount)
    throw InvalidArgument("model parameter shapes do not match");
}

std::vector<double> SurrogateModel::predict_features(const Eigen::VectorXd& f) const {
  Eigen::VectorXd z = params_.W * (f - mean_) + params_.b;
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  z /= z.sum();
  return {z.data(), z.data() + z.size()};
}

std::vector<double> SurrogateModel::predict_input(const std::vector<double>& input) const {
  return predict_features(features_from_input(input));
}

std::vector<double> SurrogateModel::scores(const RenderedImage& image) const {
  return predict_input(classifier_input(image));
}

double SurrogateModel::accuracy(const Dataset& d) const {
  int hit = 0, total = 0;
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    const int label = d.labels[static_cast<std::size_t>(i)];
    if (label < 0) continue;
    const auto p = predict_features(d.X.row(i).transpose());
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    hit += best == label ? 1 : 0;
    ++total;
  }
  return total ? static_cast<double>(hit) / total : 0.0;
}

void SurrogateModel::save_json(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "arp-logistic";
  j["version"] = 1;
  j["features"] = kFeatureCount;
  std::vector<std::string> names;
  for (auto c : classes_) names.push_back(class_name(c));
  j["classes"] = names;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["final_accuracy"] = final_accuracy;
  j["final_loss"] = final_loss;
  j["mean"] = std::vector<double>(mean_.data(), mean_.data() + mean_.size());
  j["b"] = std::vector<double>(params_.b.data(), params_.b.data() + params_.b.size());
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < params_.W.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(params_.W.cols()));
    for (Eigen::Index c = 0; c < params_.W.cols(); ++c) row[static_cast<std::size_t>(c)] = params_.W(r, c);
    rows.push_back(row);
  }
  j["W"] = rows;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump() << '\n';
}

SurrogateModel SurrogateModel::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "arp-logistic" || j.at("version") != 1 || j.at("features") != kFeatureCount)
      throw IoError(path + ": unsupported model file");
    std::vector<SignClass> classes;
    for (const auto& n : j.at("classes")) classes.push_back(class_from_name(n.get<std::string>()));
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    const auto& rows = j.at("W");
    LogisticParams p;
    p.W.resize(static_cast<Eigen::Index>(rows.size()), kFeatureCount);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = rows[r].get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(kFeatureCount)) throw IoError(path + ": bad weight row");
      for (int c = 0; c < kFeatureCount; ++c) p.W(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
    }
    p.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    SurrogateModel m(std::move(classes), std::move(p),
                     Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())));
    m.epochs = j.at("epochs").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.final_accuracy = j.at("final_accuracy").get<double>();
    m.final_loss = j.at("final_loss").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

SurrogateModel fit_logistic(const Dataset& train, const std::vector<SignClass>& classes, const TrainOptions& opt,
                            std::uint64_t seed) {
  if (train.X.rows() == 0) throw InvalidArgument("empty training set");
  if (train.Y.cols() != static_cast<Eigen::Index>(classes.size())) throw InvalidArgument("target width mismatch");
  const Eigen::VectorXd mean = train.X.colwise().mean().transpose();
  const Eigen::MatrixXd X = train.X.rowwise() - mean.transpose();
  const auto n = static_cast<double>(X.rows());

  // Largest eigenvalue of X^T X / n by power iteration; the cross-entropy
  // Hessian is bounded by half of it (plus l2).
  Eigen::VectorXd v = Eigen::VectorXd::Constant(X.cols(), 1.0 / std::sqrt(static_cast<double>(X.cols())));
  double lambda = 0.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd w = X.transpose() * (X * v) / n;
    lambda = w.norm();
    if (lambda <= 0.0) break;
    v = w / lambda;
  }
  const double lipschitz = 0.5 * lambda + 0.5 + opt.l2;  // +0.5 covers the bias column

  double step = opt.step / lipschitz;
  const auto C = static_cast<Eigen::Index>(classes.size());
  for (int attempt = 0; attempt <= opt.max_restarts; ++attempt, step *= 0.5) {
    LogisticParams p{Eigen::MatrixXd::Zero(C, X.cols()), Eigen::VectorXd::Zero(C)};
    LogisticParams vel{Eigen::MatrixXd::Zero(C, X.cols()), Eigen::VectorXd::Zero(C)};
    LogisticParams g;
    double loss = 0.0;
    bool ok = true;
    for (int e = 0; e < opt.epochs; ++e) {
      loss = softmax_loss(p, X, train.Y, opt.l2, &g);
      if (!std::isfinite(loss)) {
        ok = false;
        break;
      }
      vel.W = opt.momentum * vel.W - step * g.W;
      vel.b = opt.momentum * vel.b - step * g.b;
      p.W += vel.W;
      p.b += vel.b;
    }
    if (ok) loss = softmax_loss(p, X, train.Y, opt.l2, nullptr);
    if (!ok || !std::isfinite(loss)) continue;
    SurrogateModel m(classes, std::move(p), mean);
    m.epochs = opt.epochs;
    m.seed = seed;
    m.final_loss = loss;
    m.final_accuracy = m.accuracy(train);
    return m;
  }
  throw TrainingDiverged("loss became non-finite after " + std::to_string(opt.max_restarts) + " restarts");
}

namespace {

std::vector<double> clutter_input(Rng& rng) {
  std::vector<double> img(kPixelFeatures);
  const double g = rng.uniform(0.01, 0.5);
  const Rgb base{g * rng.uniform(0.8, 1.2), g * rng.uniform(0.8, 1.2), g * rng.uniform(0.8, 1.2)};
  for (int i = 0; i < kInputSide * kInputSide; ++i) {
    img[static_cast<std::size_t>(i) * 3] = base.r;
    img[static_cast<std::size_t>(i) * 3 + 1] = base.g;
    img[static_cast<std::size_t>(i) * 3 + 2] = base.b;
  }
  const int shapes = static_cast<int>(rng.index(6));
  for (int s = 0; s < shapes; ++s) {
    const Rgb c{rng.uniform(0.0, 0.8), rng.uniform(0.0, 0.8), rng.uniform(0.0, 0.8)};
    const int x0 = static_cast<int>(rng.index(kInputSide)), y0 = static_cast<int>(rng.index(kInputSide));
    const int w = 2 + static_cast<int>(rng.index(16)), h = 2 + static_cast<int>(rng.index(16));
    for (int y = y0; y < std::min(kInputSide, y0 + h); ++y)
      for (int x = x0; x < std::min(kInputSide, x0 + w); ++x) {
        const std::size_t i = (static_cast<std::size_t>(y) * kInputSide + x) * 3;
        img[i] = c.r;
        img[i + 1] = c.g;
        img[i + 2] = c.b;
      }
  }
  for (auto& v : img) v = std::clamp(v + 0.02 * rng.normal(), 0.0, 1.0);
  return img;
}

}  // namespace

Dataset build_dataset(const std::vector<SceneConfig>& scenes, const std::vector<SignClass>& classes, int per_class,
                      int noise_images, const EotConfig& eot, std::uint64_t seed, const MaterialRegistry& registry) {
  if (scenes.empty() || classes.empty() || per_class <= 0) throw InvalidArgument("empty training request");
  const auto C = static_cast<Eigen::Index>(classes.size());
  const Eigen::Index rows = C * per_class + std::max(0, noise_images);
  Dataset d;
  d.X.resize(rows, kFeatureCount);
  d.Y = Eigen::MatrixXd::Zero(rows, C);
  d.labels.assign(static_cast<std::size_t>(rows), -1);
  Eigen::Index r = 0;
  const PatchSet benign;
  const PolarizerConfig dual = PolarizerConfig::crossed();
  const PolarizerConfig cam = PolarizerConfig::camera_only();
  for (Eigen::Index ci = 0; ci < C; ++ci) {
    const SignClass cls = classes[static_cast<std::size_t>(ci)];
    for (int k = 0; k < per_class; ++k, ++r) {
      std::vector<double> input;
      if (cls == SignClass::Background) {
        Rng rng(derive_seed(seed, {1, static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(k)}));
        input = clutter_input(rng);
      } else {
        SceneConfig s = scenes[static_cast<std::size_t>(k) % scenes.size()];
        s.sign = sign_for_class(cls);
        s = apply_eot(s, derive_seed(seed, {2, static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(k)}), eot);
        const SceneRenderer ren(s, registry);
        RenderedImage img;
        switch (k % 4) {
          case 0: img = ren.render_day(benign); break;
          case 1: img = ren.render_night(benign); break;
          case 2: img = ren.render_night(benign, {false, dual}); break;
          default: img = ren.render_night(benign, {false, cam}); break;
        }
        input = classifier_input(img);
      }
      d.X.row(r) = features_from_input(input).transpose();
      d.Y(r, ci) = 1.0;
      d.labels[static_cast<std::size_t>(r)] = static_cast<int>(ci);
    }
  }
  Rng noise(derive_seed(seed, {3}));
  for (int k = 0; k < noise_images; ++k, ++r) {
    std::vector<double> input(kPixelFeatures);
    for (auto& v : input) v = noise.uniform();
    d.X.row(r) = features_from_input(input).transpose();
    d.Y.row(r).setConstant(1.0 / static_cast<double>(C));
  }
  return d;
}

SurrogateModel train_surrogate(const std::vector<SceneConfig>& scenes, const std::vector<SignClass>& classes,
                               std::uint64_t seed, const TrainOptions& opt) {
  const Dataset all = build_dataset(scenes, classes, opt.per_class, opt.noise_images, opt.eot, seed);
  // Deterministic shuffle; labeled rows are split, soft rows stay in training.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(all.X.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, {4}));
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  std::vector<Eigen::Index> train_rows, test_rows;
  std::size_t labeled = 0;
  for (int l : all.labels) labeled += l >= 0 ? 1 : 0;
  const auto n_test = static_cast<std::size_t>(std::floor(opt.held_out_fraction * static_cast<double>(labeled)));
  for (auto i : idx) {
    if (all.labels[static_cast<std::size_t>(i)] >= 0 && test_rows.size() < n_test) test_rows.push_back(i);
    else train_rows.push_back(i);
  }
  auto take = [&](const std::vector<Eigen::Index>& rows) {
    Dataset d;
    d.X.resize(static_cast<Eigen::Index>(rows.size()), all.X.cols());
    d.Y.resize(static_cast<Eigen::Index>(rows.size()), all.Y.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      d.X.row(static_cast<Eigen::Index>(k)) = all.X.row(rows[k]);
      d.Y.row(static_cast<Eigen::Index>(k)) = all.Y.row(rows[k]);
      d.labels.push_back(all.labels[static_cast<std::size_t>(rows[k])]);
    }
    return d;
  };
  const Dataset train = take(train_rows);
  const Dataset test = take(test_rows);
  SurrogateModel m = fit_logistic(train, classes, opt, seed);
  if (!test_rows.empty()) m.final_accuracy = m.accuracy(test);
  return m;
}

}  // namespace arp
