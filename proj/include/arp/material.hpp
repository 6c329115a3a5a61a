#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arp/color.hpp"
#include "arp/colorimetry.hpp"

namespace arp {

/// Color families of the sign sheeting.
enum class SheetColor { White, Red, Black };

const char* to_string(SheetColor c);
SheetColor sheet_color_from_string(const std::string& s);
const std::vector<SheetColor>& all_sheet_colors();

/// Optical description of one retroreflective sheeting.
///
/// `r_prime` is the coefficient of the white-equivalent sheeting; the
/// chromatic loss of a colored sheeting is carried by its specular tint.
struct MaterialSpec {
  std::string name;
  double r_prime = 0.0;  // cd / (lx m^2)
  std::optional<TintColor> tint;
  std::optional<SpectralCurve> reflectance;
  double roughness = 1.0;
  double dop_preservation = 0.0;
  Rgb diffuse_albedo{};
  std::string grade;

  void validate() const;
};

/// Override if present, otherwise the CIE pipeline result.
/// Throws MissingSpectralData if neither is available.
TintColor specular_tint(const MaterialSpec& material, const SpectralCurve& illuminant);

/// Reflectance curves of the built-in sheeting colors on the standard grid.
const SpectralCurve& sheeting_reflectance(SheetColor color);
/// Daytime albedo: linear sRGB of the color under D65, Y-normalized.
Rgb sheeting_albedo(SheetColor color);

/// Per-product constants shared by every color variant.
struct ProductSpec {
  std::string name;
  double r_prime = 0.0;
  double roughness = 1.0;
  double dop_preservation = 0.0;
  std::string grade;
};

/// Products and their color variants. Variant names are "<product>:<color>";
/// the bare product name resolves to its red variant.
class MaterialRegistry {
 public:
  /// NittoL, HIP3930, Nikkalite, DG4090 and the sign "Face" sheeting.
  static MaterialRegistry builtin();
  /// Built-ins overridden by a JSON document (see data/materials.json).
  static MaterialRegistry load(const std::string& path);

  void apply_json_text(const std::string& text);

  bool has_product(const std::string& name) const;
  const ProductSpec& product(const std::string& name) const;
  ProductSpec& product_mut(const std::string& name);
  void set_product(const ProductSpec& p);

  MaterialSpec variant(const std::string& product, SheetColor color) const;
  /// Accepts "<product>" or "<product>:<color>".
  MaterialSpec get(const std::string& name) const;

  /// The four attack products ordered by R' ascending.
  std::vector<std::string> attack_products() const;
  std::vector<std::string> product_names() const;

 private:
  std::map<std::string, ProductSpec> products_;
};

}  // namespace arp
