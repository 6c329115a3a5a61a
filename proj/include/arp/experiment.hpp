#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arp/defense.hpp"
#include "arp/error.hpp"
#include "arp/optimizer.hpp"

namespace arp {

/// Legal patch area in square inches: mpr times the sign's width and height.
double mpr_area(double mpr, double width_in, double height_in);

struct Seeds {
  std::uint64_t train = 1;
  std::uint64_t optimize = 2;
  std::uint64_t evaluate = 3;
};

struct ClassifierSection {
  TrainOptions train{};
  std::string model_path;  // load instead of training when set
  std::vector<std::string> external;  // argv of an external scorer
};

struct OptimizerSection {
  int budget = 200;
  double alpha = 1.0;
  int eot_samples = 8;
  TpeOptions tpe{};
  bool random_baseline = true;
  int asr_trials = 100;
  double w_min = 0.05, w_max = 0.8;
  double h_min = 0.05, h_max = 0.8;
};

struct DefenseMode {
  std::string name;
  PolarizerConfig filters;
};

struct DefenseSection {
  std::vector<DefenseMode> modes;
  int trials = 100;
};

enum class ScenarioKind { Attack, WhiteAblation, IorVariation, FitRoughness, Render };

struct Scenario {
  std::string id;
  ScenarioKind kind = ScenarioKind::Attack;
  SignSpec sign = SignSpec::stop();
  std::string material = "DG4090";
  double mpr = 0.1875;
  int patches = 1;
  bool white_assumption = false;  // optimize under white rendering (attack)
  std::vector<PatchParams> fixed;  // render
  std::optional<double> d_lat;  // ior_variation overrides
  std::optional<Vec3> camera_offset;
  std::vector<std::pair<double, double>> ranges;
  std::map<std::string, std::array<int, 3>> targets;  // fit_roughness, 8-bit night colors
};

struct ExperimentConfig {
  std::string name;
  Seeds seeds;
  SceneConfig scene;  // exposure resolved
  EotConfig eot;
  MaterialRegistry registry = MaterialRegistry::builtin();
  ClassifierSection classifier;
  OptimizerSection optimizer;
  DefenseSection defense;
  std::vector<Scenario> scenarios;
  std::string output = "out";
  nlohmann::json source;  // the document as given
};

/// Throws ConfigError naming the offending key; unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Preset name or path to a JSON file.
ExperimentConfig load_config(const std::string& preset_or_path);
const std::vector<std::string>& preset_names();
/// Throws ConfigError for an unknown name.
nlohmann::json preset_json(const std::string& name);
/// Replaces all three seeds with children of `seed`.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

/// Scene of a scenario: the base scene with the scenario's sign.
SceneConfig scenario_scene(const ExperimentConfig& config, const Scenario& scenario);
SearchSpace scenario_space(const ExperimentConfig& config, const Scenario& scenario);

struct AttackRun {
  OptimizeResult tpe;
  std::optional<OptimizeResult> random;
};

AttackRun run_attack_search(const ExperimentConfig& config, const Scenario& scenario, const Scorer& model,
                            std::uint64_t seed, bool white_assumption, const std::string& log_path = {},
                            const std::string& random_log_path = {});

/// ASR of the physics-optimized and white-optimized patches, both judged
/// under physics rendering on the same EoT scenes.
struct AblationResult {
  OptimizeResult physics, white;
  double asr_physics = 0.0;
  double asr_white = 0.0;
};

AblationResult run_white_ablation(const ExperimentConfig& config, const Scenario& scenario, const Scorer& model,
                                  std::uint64_t opt_seed, std::uint64_t eval_seed,
                                  const std::string& physics_log = {}, const std::string& white_log = {});

/// Ordered cells; CSV columns are the union in order of first appearance.
using ReportRow = std::vector<std::pair<std::string, nlohmann::json>>;

struct Report {
  std::string name;
  std::vector<ReportRow> rows;

  /// RFC 4180: CRLF line ends, fields with commas, quotes or line breaks quoted.
  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
  /// Cell of the first row whose "scenario" is `id`; null if absent.
  nlohmann::json cell(const std::string& id, const std::string& key) const;
};

enum Stage : unsigned {
  kStageRender = 1,
  kStageFit = 2,
  kStageOptimize = 4,
  kStageEvaluate = 8,
  kStageDefend = 16,
  kStageAnalysis = 32,
  kStageAll = 63,
};

const char* stage_name(unsigned stage);

/// Error raised inside a pipeline stage; keeps the cause's kind, what() is
/// "<kind>: [stage] <message>".
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineOptions {
  unsigned stages = kStageAll;
  const Scorer* model = nullptr;  // skips training when set
  bool write_outputs = true;
  /// Resume TPE runs from trial logs already in the output directory.
  bool resume = true;
  std::function<void(const std::string&)> progress;
};

/// Train, optimize, evaluate and defend every scenario. With write_outputs
/// the output directory receives report.csv, report.json, trials/, images/
/// and meta/. Runtimes go to meta/runtime.json only.
Report run_pipeline(const ExperimentConfig& config, const PipelineOptions& options = {});

}  // namespace arp
