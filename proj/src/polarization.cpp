#include "arp/polarization.hpp"

#include <cmath>
#include <numbers>

#include "arp/error.hpp"

namespace arp {

PolarizerConfig PolarizerConfig::crossed() { return {0.0, std::numbers::pi / 2}; }

PolarizerConfig PolarizerConfig::camera_only(double axis) { return {std::nullopt, axis}; }

void PolarizerConfig::validate() const {
  for (const auto& a : {headlight_filter, camera_filter})
    if (a && !(*a >= 0.0 && *a < std::numbers::pi)) throw InvalidArgument("polarizer axis must lie in [0, pi)");
}

double polarized_attenuation(double p, const PolarizerConfig& config) {
  if (!config.dual()) throw MissingFilter("dual-filter attenuation needs headlight and camera filters");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("dop_preservation must lie in [0, 1]");
  const double c = std::cos(*config.camera_filter - *config.headlight_filter);
  // Exactly crossed axes give cos = 6e-17; snap so extinction is exact.
  const double malus = std::abs(c) < 1e-12 ? 0.0 : c * c;
  return 0.5 * (p * malus + (1.0 - p) * 0.5);
}

double retro_transmission(double p, const PolarizerConfig& config) {
  if (config.dual()) return polarized_attenuation(p, config);
  return config.any() ? 0.5 : 1.0;
}

double diffuse_headlight_transmission(const PolarizerConfig& config) {
  if (config.dual()) return 0.25;
  return config.any() ? 0.5 : 1.0;
}

double ambient_transmission(const PolarizerConfig& config) { return config.camera_filter ? 0.5 : 1.0; }

}  // namespace arp
