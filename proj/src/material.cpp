#include "arp/material.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "arp/error.hpp"

namespace arp {

const char* to_string(SheetColor c) {
  switch (c) {
    case SheetColor::White: return "white";
    case SheetColor::Red: return "red";
    case SheetColor::Black: return "black";
  }
  return "?";
}

SheetColor sheet_color_from_string(const std::string& s) {
  if (s == "white") return SheetColor::White;
  if (s == "red") return SheetColor::Red;
  if (s == "black") return SheetColor::Black;
  throw InvalidArgument("unknown sheeting color '" + s + "'");
}

const std::vector<SheetColor>& all_sheet_colors() {
  static const std::vector<SheetColor> v{SheetColor::White, SheetColor::Red, SheetColor::Black};
  return v;
}

void MaterialSpec::validate() const {
  if (!std::isfinite(r_prime) || r_prime < 0.0) throw InvalidArgument(name + ": R' must be >= 0");
  if (!(roughness > 0.0 && roughness <= 1.0)) throw InvalidArgument(name + ": roughness must lie in (0, 1]");
  if (!(dop_preservation >= 0.0 && dop_preservation <= 1.0))
    throw InvalidArgument(name + ": dop_preservation must lie in [0, 1]");
  for (double c : {diffuse_albedo.r, diffuse_albedo.g, diffuse_albedo.b})
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument(name + ": albedo must lie in [0, 1]");
  if (reflectance) reflectance->check_reflectance();
}

TintColor specular_tint(const MaterialSpec& material, const SpectralCurve& illuminant) {
  if (material.tint) return *material.tint;
  if (!material.reflectance || material.reflectance->empty())
    throw MissingSpectralData(material.name + ": no reflectance curve and no tint override");
  return xyz_to_linear_srgb(xyz_from_spectra(illuminant, *material.reflectance));
}

namespace {

SpectralCurve make_red() {
  // Long-pass edge near 567 nm over a low plateau.
  std::vector<double> v;
  for (int i = 0; i < kGridSize; ++i) {
    const double wl = kGridStart + kGridStep * i;
    v.push_back(0.036 + (0.45 - 0.036) / (1.0 + std::exp(-(wl - 567.5) / 5.0)));
  }
  return SpectralCurve::on_grid(v);
}

}  // namespace

const SpectralCurve& sheeting_reflectance(SheetColor color) {
  static const SpectralCurve white = SpectralCurve::constant(0.85);
  static const SpectralCurve red = make_red();
  static const SpectralCurve black = SpectralCurve::constant(0.04);
  switch (color) {
    case SheetColor::White: return white;
    case SheetColor::Red: return red;
    case SheetColor::Black: return black;
  }
  return white;
}

Rgb sheeting_albedo(SheetColor color) {
  return xyz_to_linear_srgb(xyz_from_spectra(illuminant::d65(), sheeting_reflectance(color))).rgb();
}

MaterialRegistry MaterialRegistry::builtin() {
  MaterialRegistry reg;
  // R' for white sheeting at 0.2 deg observation, -4 deg entrance. Roughness
  // values come from fit_roughness against the measured night colors.
  reg.set_product({"NittoL", 70.0, 0.3531, 0.4, "ASTM D4956 Type I (engineering grade, glass bead)"});
  reg.set_product({"HIP3930", 360.0, 0.3359, 0.999, "ASTM D4956 Type IV (high-intensity prismatic)"});
  reg.set_product({"Nikkalite", 500.0, 0.3430, 0.999, "ASTM D4956 Type VIII (prismatic)"});
  reg.set_product({"DG4090", 580.0, 0.3884, 0.999, "ASTM D4956 Type XI (full-cube prismatic)"});
  // Sign base sheeting: weak, wide retroreflection; the face reads mostly diffuse.
  reg.set_product({"Face", 0.2, 1.0, 0.999, "sign face reference"});
  return reg;
}

MaterialRegistry MaterialRegistry::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open material registry " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  MaterialRegistry reg = builtin();
  reg.apply_json_text(ss.str());
  return reg;
}

void MaterialRegistry::apply_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("material registry: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("material registry must be an object");
  for (const auto& [key, value] : doc.items())
    if (key != "products") throw ConfigError("material registry: unknown key '" + key + "'");
  if (!doc.contains("products")) return;
  const auto& products = doc["products"];
  if (!products.is_object()) throw ConfigError("material registry: products must be an object");
  for (const auto& [name, entry] : products.items()) {
    if (!entry.is_object()) throw ConfigError("material registry: product " + name + " must be an object");
    ProductSpec p = has_product(name) ? product(name) : ProductSpec{name, 0.0, 1.0, 0.0, ""};
    for (const auto& [k, v] : entry.items()) {
      try {
        if (k == "r_prime") p.r_prime = v.get<double>();
        else if (k == "roughness") p.roughness = v.get<double>();
        else if (k == "dop_preservation") p.dop_preservation = v.get<double>();
        else if (k == "grade") p.grade = v.get<std::string>();
        else throw ConfigError("material registry: unknown key '" + k + "' in product " + name);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("material registry: product " + name + "." + k + ": " + e.what());
      }
    }
    MaterialSpec probe{name, p.r_prime, TintColor(1, 1, 1), std::nullopt, p.roughness, p.dop_preservation, {}, p.grade};
    try {
      probe.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    set_product(p);
  }
}

bool MaterialRegistry::has_product(const std::string& name) const { return products_.count(name) > 0; }

const ProductSpec& MaterialRegistry::product(const std::string& name) const {
  auto it = products_.find(name);
  if (it == products_.end()) throw InvalidArgument("unknown material product '" + name + "'");
  return it->second;
}

ProductSpec& MaterialRegistry::product_mut(const std::string& name) {
  auto it = products_.find(name);
  if (it == products_.end()) throw InvalidArgument("unknown material product '" + name + "'");
  return it->second;
}

void MaterialRegistry::set_product(const ProductSpec& p) { products_[p.name] = p; }

MaterialSpec MaterialRegistry::variant(const std::string& name, SheetColor color) const {
  const ProductSpec& p = product(name);
  MaterialSpec m;
  m.name = p.name + ":" + to_string(color);
  m.r_prime = p.r_prime;
  m.reflectance = sheeting_reflectance(color);
  m.roughness = p.roughness;
  m.dop_preservation = p.dop_preservation;
  m.diffuse_albedo = sheeting_albedo(color);
  m.grade = p.grade;
  return m;
}

MaterialSpec MaterialRegistry::get(const std::string& name) const {
  const auto colon = name.find(':');
  if (colon == std::string::npos) return variant(name, SheetColor::Red);
  return variant(name.substr(0, colon), sheet_color_from_string(name.substr(colon + 1)));
}

std::vector<std::string> MaterialRegistry::attack_products() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : products_)
    if (name != "Face") out.push_back(name);
  std::stable_sort(out.begin(), out.end(),
                   [&](const std::string& a, const std::string& b) { return product(a).r_prime < product(b).r_prime; });
  return out;
}

std::vector<std::string> MaterialRegistry::product_names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : products_) out.push_back(name);
  return out;
}

}  // namespace arp
