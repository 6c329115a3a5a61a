#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arp/renderer.hpp"
#include "arp/rng.hpp"
#include "arp/tsr.hpp"

namespace arp {

/// Box bounds for N rectangular patches, flattened as (x, y, w, h) per patch
/// with (x, y) the patch center in face coordinates.
struct SearchSpace {
  int n_patches = 1;
  double mpr = 0.1875;  // total area budget as a fraction of the face
  double w_min = 0.05, w_max = 0.8;
  double h_min = 0.05, h_max = 0.8;
  std::string product = "DG4090";

  double patch_budget() const { return mpr / n_patches; }
  int dims() const { return 4 * n_patches; }
  double lower(int d) const;
  double upper(int d) const;
  void validate() const;
};

/// Equal split of the area budget over n patches. Throws InvalidCount unless
/// 1 <= n <= 5.
SearchSpace split_area(const SearchSpace& space, int n);

/// Makes a parameter vector feasible: sizes over the per-patch budget shrink
/// by sqrt(budget / area), patches are moved inside the face and overlapping
/// patches are pushed apart. Color-region straddling is settled later by
/// the renderer's dominant-region material choice.
std::vector<double> repair(const SearchSpace& space, std::vector<double> params);
/// Sampler coordinates to patch parameters. Per patch z = (u, v, w, h):
/// sizes over the budget are scaled down, then the center is placed at
/// w/2 + u (1 - w) (same for v), so positions never need clamping.
std::vector<double> decode(const SearchSpace& space, const std::vector<double>& z);
PatchSet to_patch_set(const SearchSpace& space, const std::vector<double>& params);
std::vector<double> to_params(const PatchSet& set);

struct Trial {
  int index = 0;
  std::vector<double> params;  // patch centers and sizes, as evaluated
  std::vector<double> suggested;  // sampler coordinates, see decode()
  double attack_loss = 0.0;
  double stealth_loss = 0.0;
  double objective = 0.0;
  std::uint64_t seed = 0;  // EoT seed
  int eot_samples = 0;

  /// Coordinates the sampler models.
  const std::vector<double>& sampled() const { return suggested.empty() ? params : suggested; }
};

struct TrialHistory {
  std::vector<Trial> trials;
  double gamma = 0.25;
  int n_startup = 20;

  std::size_t size() const { return trials.size(); }
  void append(Trial t);
  /// Lowest objective; ties go to the earlier trial.
  const Trial& best() const;
  /// Trial indices sorted by (objective, index); the first ceil(gamma n)
  /// form the good set.
  std::pair<std::vector<int>, std::vector<int>> split() const;
};

struct TpeOptions {
  double gamma = 0.25;
  int n_startup = 20;
  int n_ei = 24;
  /// Joint product kernels over whole trials instead of independent
  /// per-dimension mixtures.
  bool multivariate = true;
  /// Weight of the broad prior kernel relative to one trial (joint mode).
  double prior_weight = 1.0;
};

/// Uniform sample during startup, otherwise the best of n_ei draws from the
/// good-set Parzen density by l(x)/g(x), in sampler coordinates.
std::vector<double> tpe_propose(const TrialHistory& history, const SearchSpace& space, std::uint64_t seed,
                                const TpeOptions& options = {});
/// tpe_propose followed by decode().
std::vector<double> tpe_suggest(const TrialHistory& history, const SearchSpace& space, std::uint64_t seed,
                                const TpeOptions& options = {});

/// Per-dimension truncated Gaussian mixture with Scott bandwidth
/// 1.06 sd n^(-1/5), floored at range / min(100, n + 1) (never below 1% of the
/// range), plus one equally weighted prior kernel centered in the range with
/// width equal to the range.
struct ParzenDensity {
  std::vector<double> centers;
  double bandwidth = 0.0;
  double lo = 0.0, hi = 1.0;
  static ParzenDensity fit(const std::vector<double>& samples, double lo, double hi);
  double pdf(double x) const;
  double log_pdf(double x) const;
  double sample(Rng& rng) const;
};

struct ObjectiveValue {
  double attack_loss = 0.0;
  double stealth_loss = 0.0;
  double objective = 0.0;
};

/// attack + alpha * stealth averaged over a fixed set of EoT scenes. The
/// scene set is drawn once from the seed, so every evaluation of one
/// evaluator sees the same environments.
class ObjectiveEvaluator {
 public:
  ObjectiveEvaluator(const SceneConfig& scene, const Scorer& model, double alpha, int eot_n, std::uint64_t seed,
                     const EotConfig& eot = {}, const NightOptions& night = {},
                     const MaterialRegistry& registry = MaterialRegistry::builtin());

  ObjectiveValue operator()(const PatchSet& patches) const;
  std::uint64_t seed() const { return seed_; }
  int eot_n() const { return static_cast<int>(renderers_.size()); }
  SignClass true_class() const { return true_class_; }

 private:
  const Scorer* model_;
  double alpha_;
  std::uint64_t seed_;
  NightOptions night_;
  SignClass true_class_;
  std::vector<std::unique_ptr<SceneRenderer>> renderers_;
};

ObjectiveValue objective(const PatchSet& patches, const SceneConfig& scene, const Scorer& model, double alpha,
                         int eot_n, std::uint64_t seed, const EotConfig& eot = {});

struct OptimizeOptions {
  int budget = 200;
  TpeOptions tpe{};
  std::string log_path;  // CSV trial log, empty for none
  bool resume = false;  // continue from an existing log at log_path
};

struct OptimizeResult {
  PatchSet best;
  TrialHistory history;
};

OptimizeResult optimize(const ObjectiveEvaluator& evaluate, const SearchSpace& space, std::uint64_t seed,
                        const OptimizeOptions& options = {});

/// Sampler coordinates of random squares: each side ~ U[w_min,
/// min(w_max, sqrt(budget))], center uniform over the positions that keep it
/// inside the face.
std::vector<double> random_square(const SearchSpace& space, Rng& rng);

/// Best of `budget` random square placements.
OptimizeResult random_baseline(const ObjectiveEvaluator& evaluate, const SearchSpace& space, int budget,
                               std::uint64_t seed, const std::string& log_path = {});

/// Fraction of EoT night renders where detect() reports attack success.
double asr(const Scorer& model, const SceneConfig& scene, const PatchSet& patches, int trials, std::uint64_t seed,
           const NightOptions& night = {}, const EotConfig& eot = {},
           const MaterialRegistry& registry = MaterialRegistry::builtin());

/// Success rate of the random baseline as an attack: every instance is a
/// fresh random square placement under a fresh EoT scene.
double random_baseline_asr(const Scorer& model, const SceneConfig& scene, const SearchSpace& space, int instances,
                           std::uint64_t seed, const EotConfig& eot = {},
                           const MaterialRegistry& registry = MaterialRegistry::builtin());

// Trial log: trial,x0,y0,w0,h0,...,sx0,sy0,sw0,sh0,...,attack_loss,stealth_loss,objective,seed
// with the patch parameters first and the sampler coordinates after them.
void write_trial_log(const std::string& path, const TrialHistory& history, int n_patches);
void append_trial_log(const std::string& path, const Trial& trial, int n_patches);
TrialHistory read_trial_log(const std::string& path, int n_patches);

}  // namespace arp
