#include "arp/experiment.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "arp/external_scorer.hpp"
#include "arp/image_io.hpp"
#include "arp/retroreflection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace arp {

double mpr_area(double mpr, double width_in, double height_in) {
  if (!(mpr >= 0.0 && mpr <= 1.0)) throw InvalidArgument("mpr must lie in [0, 1]");
  if (!(width_in > 0.0) || !(height_in > 0.0)) throw InvalidArgument("sign dimensions must be positive");
  return mpr * width_in * height_in;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kInch = 0.0254;

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }
  ~Section() = default;

  bool has(const std::string& k) const { return j_.contains(k); }
  const json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  std::string where(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  template <class T>
  T get(const std::string& k, T fallback) {
    if (!has(k)) return fallback;
    return as<T>(raw(k), where(k));
  }
  template <class T>
  T require(const std::string& k) {
    if (!has(k)) throw ConfigError("missing key " + where(k));
    return as<T>(raw(k), where(k));
  }
  Section sub(const std::string& k) {
    if (!has(k)) throw ConfigError("missing key " + where(k));
    return Section(raw(k), where(k));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key " + where(k));
  }

  template <class T>
  static T as(const json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where + " must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(where + " must be finite");
        return d;
      } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
        return v.get<int>();
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
          throw ConfigError(where + " must be a non-negative integer");
        return v.get<std::uint64_t>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + " must be true or false");
        return v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + " must be a string");
        return v.get<std::string>();
      } else {
        return v.get<T>();
      }
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

Vec3 parse_vec3(const json& v, const std::string& where) {
  check(v.is_array() && v.size() == 3, where + " must be an array of 3 numbers");
  return {Section::as<double>(v[0], where), Section::as<double>(v[1], where), Section::as<double>(v[2], where)};
}

SignSpec parse_sign(const std::string& name, const std::string& where) {
  try {
    return sign_for_class(class_from_name(name));
  } catch (const Error&) {
    throw ConfigError(where + ": unknown sign '" + name + "' (STOP, SL25, SL35, SL65, YIELD)");
  }
}

void parse_scene(Section s, SceneConfig& scene) {
  scene.d_lon = s.get("d_lon", scene.d_lon);
  scene.d_lat = s.get("d_lat", scene.d_lat);
  scene.h_s = s.get("h_s", scene.h_s);
  scene.h_l = s.get("h_l", scene.h_l);
  scene.headlight.mount_height = scene.h_l;
  if (s.has("camera_offset")) scene.camera_offset = parse_vec3(s.raw("camera_offset"), s.where("camera_offset"));
  scene.camera_yaw = s.get("camera_yaw_deg", 0.0) * kDeg;
  scene.camera_pitch = s.get("camera_pitch_deg", 0.0) * kDeg;
  scene.day_ambient.illuminance = s.get("day_ambient_lux", scene.day_ambient.illuminance);
  scene.night_ambient.illuminance = s.get("night_ambient_lux", scene.night_ambient.illuminance);
  scene.headlight.luminous_flux = s.get("headlight_flux_lm", scene.headlight.luminous_flux);
  scene.headlight.spread_half_angle = s.get("headlight_spread_deg", scene.headlight.spread_half_angle / kDeg) * kDeg;
  scene.illuminant = s.get("illuminant", scene.illuminant);
  scene.background_albedo = s.get("background_albedo", scene.background_albedo);
  if (s.has("camera")) {
    Section c = s.sub("camera");
    scene.camera.sensor_width = c.get("sensor_width_mm", scene.camera.sensor_width);
    scene.camera.sensor_height = c.get("sensor_height_mm", scene.camera.sensor_height);
    scene.camera.focal_length = c.get("focal_length_mm", scene.camera.focal_length);
    scene.camera.pixels_x = c.get("pixels_x", scene.camera.pixels_x);
    scene.camera.pixels_y = c.get("pixels_y", scene.camera.pixels_y);
    c.finish();
  }
  bool auto_exposure = true;
  if (s.has("exposure")) {
    const json& e = s.raw("exposure");
    if (e.is_string()) {
      check(e.get<std::string>() == "auto", "scene.exposure must be \"auto\" or a number");
    } else {
      scene.exposure = Section::as<double>(e, "scene.exposure");
      check(scene.exposure > 0.0, "scene.exposure must be positive");
      auto_exposure = false;
    }
  }
  s.finish();
  try {
    scene.validate();
    if (auto_exposure) scene.exposure = calibrated_exposure(scene);
  } catch (const Error& err) {
    throw ConfigError(std::string("scene: ") + err.what());
  }
}

void parse_eot(Section s, EotConfig& eot) {
  eot.flux_jitter = s.get("flux_jitter", eot.flux_jitter);
  eot.ambient_jitter = s.get("ambient_jitter", eot.ambient_jitter);
  eot.angle_jitter = s.get("angle_jitter_deg", eot.angle_jitter / kDeg) * kDeg;
  eot.distance_jitter = s.get("distance_jitter_m", eot.distance_jitter);
  s.finish();
  check(eot.flux_jitter >= 0.0 && eot.flux_jitter < 1.0, "eot.flux_jitter must lie in [0, 1)");
  check(eot.ambient_jitter >= 0.0 && eot.ambient_jitter < 1.0, "eot.ambient_jitter must lie in [0, 1)");
  check(eot.angle_jitter >= 0.0, "eot.angle_jitter_deg must be >= 0");
  check(eot.distance_jitter >= 0.0, "eot.distance_jitter_m must be >= 0");
}

void parse_classifier(Section s, ClassifierSection& c) {
  TrainOptions& t = c.train;
  t.per_class = s.get("per_class", t.per_class);
  t.noise_images = s.get("noise_images", t.noise_images);
  t.held_out_fraction = s.get("held_out_fraction", t.held_out_fraction);
  t.epochs = s.get("epochs", t.epochs);
  t.l2 = s.get("l2", t.l2);
  c.model_path = s.get("model", std::string{});
  if (s.has("external")) {
    const json& a = s.raw("external");
    check(a.is_array() && !a.empty(), "classifier.external must be a non-empty array of strings");
    for (const auto& v : a) c.external.push_back(Section::as<std::string>(v, "classifier.external"));
  }
  s.finish();
  check(t.per_class >= 1, "classifier.per_class must be >= 1");
  check(t.noise_images >= 0, "classifier.noise_images must be >= 0");
  check(t.held_out_fraction >= 0.0 && t.held_out_fraction < 1.0, "classifier.held_out_fraction must lie in [0, 1)");
  check(t.epochs >= 1, "classifier.epochs must be >= 1");
  check(t.l2 >= 0.0, "classifier.l2 must be >= 0");
  check(c.model_path.empty() || c.external.empty(), "classifier.model and classifier.external are exclusive");
}

void parse_optimizer(Section s, OptimizerSection& o) {
  o.budget = s.get("budget", o.budget);
  o.alpha = s.get("alpha", o.alpha);
  o.eot_samples = s.get("eot_samples", o.eot_samples);
  o.tpe.gamma = s.get("gamma", o.tpe.gamma);
  o.tpe.n_startup = s.get("n_startup", o.tpe.n_startup);
  o.tpe.n_ei = s.get("n_ei", o.tpe.n_ei);
  o.tpe.multivariate = s.get("multivariate", o.tpe.multivariate);
  o.tpe.prior_weight = s.get("prior_weight", o.tpe.prior_weight);
  o.random_baseline = s.get("random_baseline", o.random_baseline);
  o.asr_trials = s.get("asr_trials", o.asr_trials);
  o.w_min = s.get("w_min", o.w_min);
  o.w_max = s.get("w_max", o.w_max);
  o.h_min = s.get("h_min", o.h_min);
  o.h_max = s.get("h_max", o.h_max);
  s.finish();
  check(o.budget >= 1, "optimizer.budget must be >= 1");
  check(o.alpha >= 0.0, "optimizer.alpha must be >= 0");
  check(o.eot_samples >= 1, "optimizer.eot_samples must be >= 1");
  check(o.tpe.gamma > 0.0 && o.tpe.gamma < 1.0, "optimizer.gamma must lie in (0, 1)");
  check(o.tpe.n_startup >= 1, "optimizer.n_startup must be >= 1");
  check(o.tpe.n_startup <= o.budget, "optimizer.n_startup must not exceed optimizer.budget");
  check(o.tpe.n_ei >= 1, "optimizer.n_ei must be >= 1");
  check(o.tpe.prior_weight >= 0.0, "optimizer.prior_weight must be >= 0");
  check(o.asr_trials >= 1, "optimizer.asr_trials must be >= 1");
  check(o.w_min > 0.0 && o.w_min <= o.w_max && o.w_max <= 1.0, "optimizer.w_min/w_max must satisfy 0 < w_min <= w_max <= 1");
  check(o.h_min > 0.0 && o.h_min <= o.h_max && o.h_max <= 1.0, "optimizer.h_min/h_max must satisfy 0 < h_min <= h_max <= 1");
}

DefenseMode parse_mode(const json& v, const std::string& where) {
  if (v.is_string()) {
    const std::string n = v.get<std::string>();
    if (n == "none") return {n, PolarizerConfig::none()};
    if (n == "dual") return {n, PolarizerConfig::crossed()};
    if (n == "camera_only") return {n, PolarizerConfig::camera_only()};
    throw ConfigError(where + ": unknown filter mode '" + n + "' (none, dual, camera_only or an object)");
  }
  Section s(v, where);
  DefenseMode m;
  m.name = s.require<std::string>("name");
  if (s.has("headlight_deg")) m.filters.headlight_filter = s.require<double>("headlight_deg") * kDeg;
  if (s.has("camera_deg")) m.filters.camera_filter = s.require<double>("camera_deg") * kDeg;
  s.finish();
  try {
    m.filters.validate();
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return m;
}

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return id.front() != '.';
}

Scenario parse_scenario(Section s, int patches_default) {
  Scenario sc;
  sc.id = s.require<std::string>("id");
  check(safe_id(sc.id), s.where("id") + " must be 1-64 characters of [A-Za-z0-9_.-]");
  const std::string kind = s.require<std::string>("kind");
  std::set<std::string> allowed{"id", "kind"};
  auto allow = [&](std::initializer_list<const char*> ks) {
    for (const char* k : ks) allowed.insert(k);
  };
  if (kind == "attack") {
    sc.kind = ScenarioKind::Attack;
    allow({"sign", "material", "mpr", "patches", "white_assumption"});
  } else if (kind == "white_ablation") {
    sc.kind = ScenarioKind::WhiteAblation;
    allow({"sign", "material", "mpr", "patches"});
  } else if (kind == "ior_variation") {
    sc.kind = ScenarioKind::IorVariation;
    allow({"d_lat", "camera_offset", "ranges"});
  } else if (kind == "fit_roughness") {
    sc.kind = ScenarioKind::FitRoughness;
    allow({"targets"});
  } else if (kind == "render") {
    sc.kind = ScenarioKind::Render;
    allow({"sign", "mpr", "fixed"});
  } else {
    throw ConfigError(s.where("kind") + ": unknown kind '" + kind +
                      "' (attack, white_ablation, ior_variation, fit_roughness, render)");
  }
  for (const char* k : {"sign", "material", "mpr", "patches", "white_assumption", "d_lat", "camera_offset", "ranges",
                        "targets", "fixed"})
    if (s.has(k) && !allowed.count(k)) throw ConfigError(s.where(k) + " is not used by kind " + kind);

  if (s.has("sign")) sc.sign = parse_sign(s.require<std::string>("sign"), s.where("sign"));
  sc.material = s.get("material", sc.material);
  sc.mpr = s.get("mpr", sc.mpr);
  sc.patches = s.get("patches", patches_default);
  sc.white_assumption = s.get("white_assumption", false);
  check(sc.mpr > 0.0 && sc.mpr <= 1.0, s.where("mpr") + " must lie in (0, 1]");
  check(sc.patches >= 1 && sc.patches <= 5, s.where("patches") + " must lie in [1, 5]");
  if (s.has("d_lat")) sc.d_lat = s.require<double>("d_lat");
  if (s.has("camera_offset")) sc.camera_offset = parse_vec3(s.raw("camera_offset"), s.where("camera_offset"));
  if (s.has("ranges")) {
    const json& r = s.raw("ranges");
    check(r.is_array() && !r.empty(), s.where("ranges") + " must be a non-empty array of [d_min, d_max]");
    for (const auto& p : r) {
      check(p.is_array() && p.size() == 2, s.where("ranges") + " entries must be [d_min, d_max]");
      const double a = Section::as<double>(p[0], s.where("ranges")), b = Section::as<double>(p[1], s.where("ranges"));
      check(a > 0.0 && b > a, s.where("ranges") + " needs 0 < d_min < d_max");
      sc.ranges.emplace_back(a, b);
    }
  } else if (sc.kind == ScenarioKind::IorVariation) {
    sc.ranges = {{15.0, 50.0}, {30.0, 50.0}};
  }
  if (s.has("targets")) {
    Section t = s.sub("targets");
    for (const auto& [name, v] : s.raw("targets").items()) {
      const json& c = t.raw(name);
      check(c.is_array() && c.size() == 3, t.where(name) + " must be [r, g, b]");
      std::array<int, 3> rgb{};
      for (int i = 0; i < 3; ++i) {
        rgb[i] = Section::as<int>(c[i], t.where(name));
        check(rgb[i] >= 0 && rgb[i] <= 255, t.where(name) + " channels must lie in [0, 255]");
      }
      sc.targets[name] = rgb;
    }
    t.finish();
  } else if (sc.kind == ScenarioKind::FitRoughness) {
    sc.targets = {{"NittoL", {255, 246, 80}},
                  {"HIP3930", {252, 244, 156}},
                  {"Nikkalite", {255, 255, 189}},
                  {"DG4090", {255, 255, 254}}};
  }
  if (s.has("fixed")) {
    const json& f = s.raw("fixed");
    check(f.is_array(), s.where("fixed") + " must be an array of patches");
    for (std::size_t i = 0; i < f.size(); ++i) {
      Section p(f[i], s.where("fixed") + "[" + std::to_string(i) + "]");
      PatchParams pp;
      pp.x = p.require<double>("x");
      pp.y = p.require<double>("y");
      pp.w = p.require<double>("w");
      pp.h = p.require<double>("h");
      pp.product = p.get("product", pp.product);
      p.finish();
      sc.fixed.push_back(pp);
    }
  }
  s.finish();
  return sc;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.source = doc;
  Section top(doc, "");
  cfg.name = top.require<std::string>("name");
  check(safe_id(cfg.name), "name must be 1-64 characters of [A-Za-z0-9_.-]");
  {
    Section s = top.sub("seeds");
    cfg.seeds.train = s.require<std::uint64_t>("train");
    cfg.seeds.optimize = s.require<std::uint64_t>("optimize");
    cfg.seeds.evaluate = s.require<std::uint64_t>("evaluate");
    s.finish();
  }
  if (top.has("materials")) cfg.registry.apply_json_text(top.raw("materials").dump());
  if (top.has("scene")) parse_scene(top.sub("scene"), cfg.scene);
  else cfg.scene.exposure = calibrated_exposure(cfg.scene);
  if (top.has("eot")) parse_eot(top.sub("eot"), cfg.eot);
  cfg.classifier.train.eot = cfg.eot;
  if (top.has("classifier")) parse_classifier(top.sub("classifier"), cfg.classifier);
  if (top.has("optimizer")) parse_optimizer(top.sub("optimizer"), cfg.optimizer);
  if (top.has("defense")) {
    Section s = top.sub("defense");
    cfg.defense.trials = s.get("trials", cfg.defense.trials);
    check(cfg.defense.trials >= 1, "defense.trials must be >= 1");
    if (s.has("modes")) {
      const json& m = s.raw("modes");
      check(m.is_array(), "defense.modes must be an array");
      std::set<std::string> names;
      for (std::size_t i = 0; i < m.size(); ++i) {
        auto mode = parse_mode(m[i], "defense.modes[" + std::to_string(i) + "]");
        check(safe_id(mode.name) && names.insert(mode.name).second, "defense mode names must be unique identifiers");
        cfg.defense.modes.push_back(mode);
      }
    }
    if (s.has("dop")) {
      Section d = s.sub("dop");
      for (const auto& [name, v] : s.raw("dop").items()) {
        const double p = Section::as<double>(d.raw(name), d.where(name));
        check(p >= 0.0 && p <= 1.0, d.where(name) + " must lie in [0, 1]");
        check(cfg.registry.has_product(name), d.where(name) + ": unknown product");
        cfg.registry.product_mut(name).dop_preservation = p;
      }
      d.finish();
    }
    s.finish();
  }
  {
    const json& list = top.raw("scenarios");
    check(list.is_array() && !list.empty(), "scenarios must be a non-empty array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list.size(); ++i) {
      Scenario sc = parse_scenario(Section(list[i], "scenarios[" + std::to_string(i) + "]"), 1);
      check(ids.insert(sc.id).second, "duplicate scenario id '" + sc.id + "'");
      auto known = [&](const std::string& p) {
        check(cfg.registry.has_product(p), "scenario " + sc.id + ": unknown product '" + p + "'");
      };
      if (sc.kind == ScenarioKind::Attack || sc.kind == ScenarioKind::WhiteAblation) known(sc.material);
      for (const auto& [name, rgb] : sc.targets) known(name);
      for (const auto& p : sc.fixed) known(p.product);
      cfg.scenarios.push_back(std::move(sc));
    }
  }
  cfg.output = top.get("output", cfg.output);
  check(!cfg.output.empty(), "output must not be empty");
  top.finish();
  return cfg;
}

namespace {

json base_preset(const std::string& name) {
  return {{"name", name},
          {"seeds", {{"train", 7}, {"optimize", 11}, {"evaluate", 13}}},
          {"scene", json::object()},
          {"eot", json::object()},
          {"classifier", json::object()},
          {"optimizer", {{"budget", 200}, {"alpha", 1.0}, {"eot_samples", 8}, {"asr_trials", 100}}},
          {"defense", {{"modes", {"dual", "camera_only"}}, {"trials", 100}}},
          {"output", "out/" + name}};
}

json attack(const std::string& id, const std::string& sign, const std::string& material, double mpr, int n = 1) {
  return {{"id", id}, {"kind", "attack"}, {"sign", sign}, {"material", material}, {"mpr", mpr}, {"patches", n}};
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"static_stop",    "stop_dg4090_mpr1875", "mpr_sweep",
                                              "material_sweep", "white_ablation",      "multi_patch",
                                              "defense_matrix", "ior_variation"};
  return names;
}

json preset_json(const std::string& name) {
  json p = base_preset(name);
  json& sc = p["scenarios"];
  sc = json::array();
  if (name == "static_stop") {
    sc.push_back({{"id", "benign"}, {"kind", "render"}, {"sign", "STOP"}, {"fixed", json::array()}});
    sc.push_back({{"id", "roughness"}, {"kind", "fit_roughness"}});
    sc.push_back(attack("stop_dg4090_mpr0625", "STOP", "DG4090", 0.0625));
  } else if (name == "stop_dg4090_mpr1875") {
    sc.push_back(attack("stop_dg4090_mpr1875", "STOP", "DG4090", 0.1875));
  } else if (name == "mpr_sweep") {
    for (auto [tag, m] : std::vector<std::pair<std::string, double>>{
             {"0625", 0.0625}, {"125", 0.125}, {"1875", 0.1875}, {"25", 0.25}})
      sc.push_back(attack("stop_dg4090_mpr" + tag, "STOP", "DG4090", m));
    p["defense"]["modes"] = json::array();
  } else if (name == "material_sweep") {
    for (const char* m : {"NittoL", "HIP3930", "Nikkalite", "DG4090"})
      sc.push_back(attack(std::string("stop_") + m + "_mpr1875", "STOP", m, 0.1875));
    p["defense"]["modes"] = json::array();
  } else if (name == "white_ablation") {
    sc.push_back({{"id", "stop_NittoL_mpr25"},
                  {"kind", "white_ablation"},
                  {"sign", "STOP"},
                  {"material", "NittoL"},
                  {"mpr", 0.25}});
    p["optimizer"]["random_baseline"] = false;
  } else if (name == "multi_patch") {
    for (int n = 1; n <= 5; ++n)
      sc.push_back(attack("stop_dg4090_n" + std::to_string(n), "STOP", "DG4090", 0.1875, n));
    p["defense"]["modes"] = json::array();
  } else if (name == "defense_matrix") {
    sc.push_back(attack("stop_dg4090_mpr1875", "STOP", "DG4090", 0.1875));
    sc.push_back(attack("stop_NittoL_mpr1875", "STOP", "NittoL", 0.1875));
    sc.push_back(attack("sl65_dg4090_mpr25", "SL65", "DG4090", 0.25));
    p["defense"]["modes"] = {"none", "dual", "camera_only"};
  } else if (name == "ior_variation") {
    sc.push_back({{"id", "dlat_185"},
                  {"kind", "ior_variation"},
                  {"d_lat", 1.85},
                  {"camera_offset", {0.0, 0.0, 0.0}},
                  {"ranges", {{15.0, 50.0}, {30.0, 50.0}}}});
    sc.push_back({{"id", "dlat_0"},
                  {"kind", "ior_variation"},
                  {"d_lat", 0.0},
                  {"camera_offset", {0.0, 0.0, 0.0}},
                  {"ranges", {{15.0, 50.0}, {30.0, 50.0}}}});
  } else {
    std::string all;
    for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (" + all + ")");
  }
  return p;
}

ExperimentConfig load_config(const std::string& preset_or_path) {
  for (const auto& n : preset_names())
    if (n == preset_or_path) return parse_config(preset_json(n));
  std::ifstream in(preset_or_path);
  if (!in) throw ConfigError("'" + preset_or_path + "' is neither a preset nor a readable file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(preset_or_path + ": " + e.what());
  }
  return parse_config(doc);
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seeds = {derive_seed(seed, {1}), derive_seed(seed, {2}), derive_seed(seed, {3})};
  config.source["seeds"] = {{"train", config.seeds.train},
                            {"optimize", config.seeds.optimize},
                            {"evaluate", config.seeds.evaluate}};
}

SceneConfig scenario_scene(const ExperimentConfig& config, const Scenario& scenario) {
  SceneConfig s = config.scene;
  s.sign = scenario.sign;
  return s;
}

SearchSpace scenario_space(const ExperimentConfig& config, const Scenario& scenario) {
  SearchSpace sp;
  sp.n_patches = scenario.patches;
  sp.mpr = scenario.mpr;
  sp.w_min = config.optimizer.w_min;
  sp.w_max = config.optimizer.w_max;
  sp.h_min = config.optimizer.h_min;
  sp.h_max = config.optimizer.h_max;
  sp.product = scenario.material;
  sp.validate();
  return sp;
}

AttackRun run_attack_search(const ExperimentConfig& config, const Scenario& scenario, const Scorer& model,
                            std::uint64_t seed, bool white_assumption, const std::string& log_path,
                            const std::string& random_log_path) {
  const OptimizerSection& o = config.optimizer;
  const SceneConfig scene = scenario_scene(config, scenario);
  const SearchSpace space = scenario_space(config, scenario);
  const ObjectiveEvaluator eval(scene, model, o.alpha, o.eot_samples, derive_seed(seed, {1}), config.eot,
                                NightOptions{white_assumption, {}}, config.registry);
  AttackRun run;
  OptimizeOptions oo;
  oo.budget = o.budget;
  oo.tpe = o.tpe;
  oo.log_path = log_path;
  oo.resume = !log_path.empty();
  run.tpe = optimize(eval, space, derive_seed(seed, {2}), oo);
  if (o.random_baseline) run.random = random_baseline(eval, space, o.budget, derive_seed(seed, {3}), random_log_path);
  return run;
}

AblationResult run_white_ablation(const ExperimentConfig& config, const Scenario& scenario, const Scorer& model,
                                  std::uint64_t opt_seed, std::uint64_t eval_seed, const std::string& physics_log,
                                  const std::string& white_log) {
  ExperimentConfig c = config;
  c.optimizer.random_baseline = false;
  AblationResult r;
  r.physics = run_attack_search(c, scenario, model, opt_seed, false, physics_log).tpe;
  r.white = run_attack_search(c, scenario, model, opt_seed, true, white_log).tpe;
  const SceneConfig scene = scenario_scene(config, scenario);
  const int n = config.optimizer.asr_trials;
  r.asr_physics = asr(model, scene, r.physics.best, n, eval_seed, {}, config.eot, config.registry);
  r.asr_white = asr(model, scene, r.white.best, n, eval_seed, {}, config.eot, config.registry);
  return r;
}

// ---------------------------------------------------------------- report

namespace {

std::string csv_field(const json& v) {
  std::string s;
  if (v.is_null()) return "";
  if (v.is_string()) s = v.get<std::string>();
  else s = v.dump();  // shortest round-trip form for numbers
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string Report::to_csv() const {
  std::vector<std::string> cols;
  std::set<std::string> seen;
  for (const auto& r : rows)
    for (const auto& [k, v] : r)
      if (seen.insert(k).second) cols.push_back(k);
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + csv_field(cols[i]);
  out += "\r\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ",";
      for (const auto& [k, v] : r)
        if (k == cols[i]) {
          out += csv_field(v);
          break;
        }
    }
    out += "\r\n";
  }
  return out;
}

nlohmann::ordered_json Report::to_json() const {
  nlohmann::ordered_json rs = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r) o[k] = v;
    rs.push_back(o);
  }
  nlohmann::ordered_json doc;
  doc["name"] = name;
  doc["rows"] = rs;
  return doc;
}

json Report::cell(const std::string& id, const std::string& key) const {
  for (const auto& r : rows) {
    bool match = false;
    for (const auto& [k, v] : r)
      if (k == "scenario" && v == id) match = true;
    if (!match) continue;
    for (const auto& [k, v] : r)
      if (k == key) return v;
  }
  return nullptr;
}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.kind(), "[" + stage + "] " + std::string(cause.what()).substr(cause.kind().size() + 2)),
      stage_(std::move(stage)) {}

const char* stage_name(unsigned stage) {
  switch (stage) {
    case kStageRender: return "render";
    case kStageFit: return "fit-roughness";
    case kStageOptimize: return "optimize";
    case kStageEvaluate: return "evaluate";
    case kStageDefend: return "defend";
    case kStageAnalysis: return "analysis";
    default: return "pipeline";
  }
}

// ---------------------------------------------------------------- pipeline

namespace {

const char* kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Attack: return "attack";
    case ScenarioKind::WhiteAblation: return "white_ablation";
    case ScenarioKind::IorVariation: return "ior_variation";
    case ScenarioKind::FitRoughness: return "fit_roughness";
    case ScenarioKind::Render: return "render";
  }
  return "?";
}

std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : id) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

json patches_json(const PatchSet& set) {
  json a = json::array();
  for (const auto& p : set.patches)
    a.push_back({{"x", p.x}, {"y", p.y}, {"w", p.w}, {"h", p.h}, {"product", p.product}});
  return a;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::optional<std::string> read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void triptych(const fs::path& path, const SceneConfig& scene, const PatchSet& patches, const PolarizerConfig& filters,
              const MaterialRegistry& registry) {
  const SceneRenderer r(scene, registry);
  write_png(path.string(), hstack({tone_map(r.render_day(patches)), tone_map(r.render_night(patches)),
                                   tone_map(r.render_night(patches, {false, filters}))}));
}

nlohmann::ordered_json scene_json(const SceneConfig& s) {
  nlohmann::ordered_json j;
  j["sign"] = s.sign.label();
  j["sign_width_m"] = s.sign.width;
  j["sign_height_m"] = s.sign.height;
  j["d_lon"] = s.d_lon;
  j["d_lat"] = s.d_lat;
  j["h_s"] = s.h_s;
  j["h_l"] = s.h_l;
  j["camera_offset"] = {s.camera_offset.x, s.camera_offset.y, s.camera_offset.z};
  j["camera_yaw_deg"] = s.camera_yaw / kDeg;
  j["camera_pitch_deg"] = s.camera_pitch / kDeg;
  j["day_ambient_lux"] = s.day_ambient.illuminance;
  j["night_ambient_lux"] = s.night_ambient.illuminance;
  j["headlight_flux_lm"] = s.headlight.luminous_flux;
  j["headlight_spread_deg"] = s.headlight.spread_half_angle / kDeg;
  j["illuminant"] = s.illuminant;
  j["exposure"] = s.exposure;
  j["background_albedo"] = s.background_albedo;
  j["camera"] = {{"sensor_width_mm", s.camera.sensor_width},
                 {"sensor_height_mm", s.camera.sensor_height},
                 {"focal_length_mm", s.camera.focal_length},
                 {"pixels_x", s.camera.pixels_x},
                 {"pixels_y", s.camera.pixels_y}};
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Report run_pipeline(const ExperimentConfig& config, const PipelineOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  auto note = [&](const std::string& m) {
    if (options.progress) options.progress(m);
  };
  const bool write = options.write_outputs;
  const fs::path out = config.output;
  json source = config.source;
  source.erase("output");
  const std::string config_text = source.dump(2) + "\n";
  bool resume = options.resume;
  if (write) {
    staged("output", [&] {
      std::error_code ec;
      for (const char* d : {"trials", "images", "meta"}) fs::create_directories(out / d, ec);
      if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
      // Logs from a different configuration are not resumed.
      if (read_text(out / "meta" / "config.json") != config_text) resume = false;
      write_text(out / "meta" / "config.json", config_text);
    });
  }
  auto log_path = [&](const std::string& file) { return write ? (out / "trials" / file).string() : std::string{}; };
  json runtime = json::object();

  const unsigned model_stages = kStageOptimize | kStageEvaluate | kStageDefend;
  bool needs_model = false;
  for (const auto& sc : config.scenarios)
    if ((sc.kind == ScenarioKind::Attack || sc.kind == ScenarioKind::WhiteAblation) && (options.stages & model_stages))
      needs_model = true;

  std::unique_ptr<Scorer> owned;
  const Scorer* model = options.model;
  if (needs_model && !model) {
    const auto t0 = std::chrono::steady_clock::now();
    staged("train", [&] {
      const ClassifierSection& c = config.classifier;
      if (!c.external.empty()) {
        note("starting external classifier");
        owned = std::make_unique<ExternalScorer>(c.external, all_classes(),
                                                 write ? (out / "meta").string() : fs::temp_directory_path().string());
      } else if (!c.model_path.empty()) {
        note("loading classifier " + c.model_path);
        owned = std::make_unique<SurrogateModel>(SurrogateModel::load_json(c.model_path));
      } else {
        const fs::path cached = out / "meta" / "model.json";
        if (write && resume && fs::exists(cached)) {
          note("reusing classifier " + cached.string());
          owned = std::make_unique<SurrogateModel>(SurrogateModel::load_json(cached.string()));
        } else {
          note("training classifier");
          auto m = std::make_unique<SurrogateModel>(
              train_surrogate({config.scene}, all_classes(), config.seeds.train, c.train));
          note("held-out accuracy " + std::to_string(m->final_accuracy));
          if (write) m->save_json(cached.string());
          owned = std::move(m);
        }
      }
    });
    model = owned.get();
    runtime["train_s"] = seconds_since(t0);
  }

  Report report;
  report.name = config.name;
  const PolarizerConfig shown_filters = [&] {
    for (const auto& m : config.defense.modes)
      if (m.filters.dual()) return m.filters;
    return PolarizerConfig::crossed();
  }();

  for (const auto& sc : config.scenarios) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t h = id_hash(sc.id);
    const std::uint64_t opt_seed = derive_seed(config.seeds.optimize, {h});
    const std::uint64_t eval_seed = derive_seed(config.seeds.evaluate, {h});
    const SceneConfig scene = scenario_scene(config, sc);
    auto base_row = [&] {
      return ReportRow{{"scenario", sc.id}, {"kind", kind_name(sc.kind)}};
    };
    auto seed_cells = [&](ReportRow& row) {
      row.emplace_back("optimize_seed", opt_seed);
      row.emplace_back("evaluate_seed", eval_seed);
    };
    if (write)
      staged("output", [&] {
        write_text(out / "meta" / (sc.id + ".json"), scene_json(scene).dump(2) + "\n");
      });

    switch (sc.kind) {
      case ScenarioKind::Render: {
        if (!(options.stages & kStageRender)) break;
        staged("render", [&] {
          note("render " + sc.id);
          const PatchSet set{sc.fixed, sc.mpr};
          ReportRow row = base_row();
          row.emplace_back("sign", scene.sign.label());
          row.emplace_back("n_patches", static_cast<int>(set.patches.size()));
          row.emplace_back("mpr", sc.mpr);
          row.emplace_back("patch_area", set.total_area());
          row.emplace_back("conformant", set.conformant());
          if (write) {
            triptych(out / "images" / (sc.id + ".png"), scene, set, shown_filters, config.registry);
            row.emplace_back("image", "images/" + sc.id + ".png");
          }
          report.rows.push_back(std::move(row));
        });
        break;
      }
      case ScenarioKind::FitRoughness: {
        if (!(options.stages & kStageFit)) break;
        staged("fit-roughness", [&] {
          note("fit roughness " + sc.id);
          for (const auto& [name, rgb] : sc.targets) {
            const MaterialSpec m = config.registry.get(name);
            const RoughnessFit f = fit_roughness(m, linear_from_display(rgb[0], rgb[1], rgb[2]), scene);
            ReportRow row = base_row();
            row.emplace_back("material", name);
            row.emplace_back("target_rgb", std::to_string(rgb[0]) + " " + std::to_string(rgb[1]) + " " +
                                               std::to_string(rgb[2]));
            row.emplace_back("roughness", f.roughness);
            row.emplace_back("residual", f.residual);
            row.emplace_back("registry_roughness", m.roughness);
            report.rows.push_back(std::move(row));
          }
        });
        break;
      }
      case ScenarioKind::IorVariation: {
        if (!(options.stages & kStageAnalysis)) break;
        staged("analysis", [&] {
          SceneConfig s = config.scene;
          if (sc.d_lat) s.d_lat = *sc.d_lat;
          if (sc.camera_offset) s.camera_offset = *sc.camera_offset;
          for (const auto& [a, b] : sc.ranges) {
            ReportRow row = base_row();
            row.emplace_back("d_lat", s.d_lat);
            row.emplace_back("dh", s.h_s - s.h_l);
            row.emplace_back("d_min", a);
            row.emplace_back("d_max", b);
            row.emplace_back("ior_variation", ior_distance_variation(s, a, b));
            report.rows.push_back(std::move(row));
          }
        });
        break;
      }
      case ScenarioKind::Attack: {
        if (options.stages & kStageRender && write)
          staged("render", [&] {
            triptych(out / "images" / (sc.id + "_benign.png"), scene, PatchSet{{}, sc.mpr}, shown_filters,
                     config.registry);
          });
        if (!(options.stages & model_stages)) break;
        ReportRow row = base_row();
        row.emplace_back("sign", scene.sign.label());
        row.emplace_back("material", sc.material);
        row.emplace_back("mpr", sc.mpr);
        row.emplace_back("mpr_area_in2", mpr_area(sc.mpr, scene.sign.width / kInch, scene.sign.height / kInch));
        row.emplace_back("n_patches", sc.patches);
        row.emplace_back("white_assumption", sc.white_assumption);
        seed_cells(row);
        const AttackRun run = staged("optimize", [&] {
          note("optimize " + sc.id);
          return run_attack_search(config, sc, *model, opt_seed, sc.white_assumption, log_path(sc.id + ".csv"),
                                   log_path(sc.id + "_random.csv"));
        });
        const Trial& best = run.tpe.history.best();
        row.emplace_back("best_trial", best.index);
        row.emplace_back("best_objective", best.objective);
        row.emplace_back("attack_loss", best.attack_loss);
        row.emplace_back("stealth_loss", best.stealth_loss);
        row.emplace_back("patches", patches_json(run.tpe.best).dump());
        if (run.random) row.emplace_back("random_best_objective", run.random->history.best().objective);
        if (write) {
          row.emplace_back("trial_log", "trials/" + sc.id + ".csv");
          staged("render", [&] {
            triptych(out / "images" / (sc.id + ".png"), scene, run.tpe.best, shown_filters, config.registry);
          });
          row.emplace_back("image", "images/" + sc.id + ".png");
        }
        const int n = config.optimizer.asr_trials;
        if (options.stages & kStageEvaluate) {
          staged("evaluate", [&] {
            note("evaluate " + sc.id);
            row.emplace_back("asr", asr(*model, scene, run.tpe.best, n, derive_seed(eval_seed, {1}), {}, config.eot,
                                        config.registry));
            if (sc.white_assumption)
              row.emplace_back("asr_white_render", asr(*model, scene, run.tpe.best, n, derive_seed(eval_seed, {1}),
                                                       {true, {}}, config.eot, config.registry));
            if (config.optimizer.random_baseline) {
              const SearchSpace space = scenario_space(config, sc);
              row.emplace_back("random_asr", random_baseline_asr(*model, scene, space, n, derive_seed(eval_seed, {2}),
                                                                 config.eot, config.registry));
              row.emplace_back("random_best_asr", asr(*model, scene, run.random->best, n, derive_seed(eval_seed, {1}),
                                                      {}, config.eot, config.registry));
            }
          });
        }
        if (options.stages & kStageDefend) {
          staged("defend", [&] {
            for (const auto& mode : config.defense.modes) {
              note("defend " + sc.id + " " + mode.name);
              // Same EoT scenes as the ASR above, so the undefended rate matches.
              const DefenseResult d = evaluate_defense(*model, scene, run.tpe.best, mode.filters, config.defense.trials,
                                                       derive_seed(eval_seed, {1}), config.eot, config.registry);
              row.emplace_back("asr_undefended", d.asr_undefended);
              row.emplace_back("asr_" + mode.name, d.asr_defended);
              row.emplace_back("benign_accuracy_" + mode.name, d.benign_accuracy_defended);
            }
          });
          // Keep one asr_undefended cell.
          bool first = true;
          std::erase_if(row, [&](const auto& kv) {
            if (kv.first != "asr_undefended") return false;
            if (first) {
              first = false;
              return false;
            }
            return true;
          });
        }
        report.rows.push_back(std::move(row));
        break;
      }
      case ScenarioKind::WhiteAblation: {
        if (!(options.stages & model_stages)) break;
        ReportRow row = base_row();
        row.emplace_back("sign", scene.sign.label());
        row.emplace_back("material", sc.material);
        row.emplace_back("mpr", sc.mpr);
        row.emplace_back("n_patches", sc.patches);
        seed_cells(row);
        ExperimentConfig c = config;
        c.optimizer.random_baseline = false;
        const auto [phys, white] = staged("optimize", [&] {
          note("optimize " + sc.id + " (physics and white)");
          return std::pair{run_attack_search(c, sc, *model, opt_seed, false, log_path(sc.id + "_physics.csv")).tpe,
                           run_attack_search(c, sc, *model, opt_seed, true, log_path(sc.id + "_white.csv")).tpe};
        });
        row.emplace_back("physics_best_objective", phys.history.best().objective);
        row.emplace_back("white_best_objective", white.history.best().objective);
        row.emplace_back("physics_patches", patches_json(phys.best).dump());
        row.emplace_back("white_patches", patches_json(white.best).dump());
        if (options.stages & kStageEvaluate) {
          staged("evaluate", [&] {
            note("evaluate " + sc.id);
            const int n = config.optimizer.asr_trials;
            const double ap = asr(*model, scene, phys.best, n, derive_seed(eval_seed, {1}), {}, config.eot,
                                  config.registry);
            const double aw = asr(*model, scene, white.best, n, derive_seed(eval_seed, {1}), {}, config.eot,
                                  config.registry);
            row.emplace_back("asr_physics", ap);
            row.emplace_back("asr_white", aw);
            row.emplace_back("asr_white_under_white_render", asr(*model, scene, white.best, n,
                                                                 derive_seed(eval_seed, {1}), {true, {}}, config.eot,
                                                                 config.registry));
          });
        }
        if (write) {
          staged("render", [&] {
            const SceneRenderer r(scene, config.registry);
            write_png((out / "images" / (sc.id + ".png")).string(),
                      hstack({tone_map(r.render_night(phys.best)), tone_map(r.render_night(white.best)),
                              tone_map(r.render_night(white.best, {true, {}}))}));
          });
          row.emplace_back("image", "images/" + sc.id + ".png");
        }
        report.rows.push_back(std::move(row));
        break;
      }
    }
    runtime["scenario_s"][sc.id] = seconds_since(t0);
  }

  runtime["total_s"] = seconds_since(t_start);
  if (write) {
    staged("output", [&] {
      write_text(out / "report.csv", report.to_csv());
      write_text(out / "report.json", report.to_json().dump(2) + "\n");
      write_text(out / "meta" / "runtime.json", runtime.dump(2) + "\n");
    });
  }
  return report;
}

}  // namespace arp
