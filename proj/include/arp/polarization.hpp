#pragma once

#include <optional>

namespace arp {

/// Linear polarizer axes in radians, [0, pi). Ideal filters: unpolarized
/// light is halved, fully polarized light follows Malus' law.
struct PolarizerConfig {
  std::optional<double> headlight_filter;
  std::optional<double> camera_filter;

  static PolarizerConfig none() { return {}; }
  static PolarizerConfig crossed();
  static PolarizerConfig camera_only(double axis = 1.5707963267948966);

  bool dual() const { return headlight_filter && camera_filter; }
  bool any() const { return headlight_filter || camera_filter; }
  void validate() const;
};

/// Dual-filter transmission of the retroreflected path:
/// 0.5 * (p cos^2(d) + (1 - p) * 0.5). Throws MissingFilter unless both
/// filters are present.
double polarized_attenuation(double dop_preservation, const PolarizerConfig& config);

/// Transmission of the retroreflected headlight path for any filter set
/// (1 without filters).
double retro_transmission(double dop_preservation, const PolarizerConfig& config);
/// Headlight light scattered diffusely (fully depolarized).
double diffuse_headlight_transmission(const PolarizerConfig& config);
/// Unpolarized ambient light passes the camera filter only.
double ambient_transmission(const PolarizerConfig& config);

}  // namespace arp
