#include "arp/photometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "arp/error.hpp"

namespace arp {

void HeadlightSpec::validate() const {
  if (!std::isfinite(luminous_flux) || luminous_flux < 0.0) throw InvalidArgument("headlight flux must be >= 0");
  if (!(spread_half_angle > 0.0 && spread_half_angle < std::numbers::pi / 2))
    throw InvalidArgument("headlight spread half-angle must lie in (0, pi/2) rad");
  if (!(mount_height > 0.0)) throw InvalidArgument("headlight mount height must be > 0");
}

void AmbientLight::validate() const {
  if (!std::isfinite(illuminance) || illuminance < 0.0) throw InvalidArgument("ambient illuminance must be >= 0");
}

double beam_area(const HeadlightSpec& headlight, double distance) {
  if (!(distance > 0.0) || !std::isfinite(distance))
    throw InvalidDistance("distance must be > 0, got " + std::to_string(distance));
  const double radius = distance * std::tan(headlight.spread_half_angle);
  return std::numbers::pi * radius * radius;
}

double headlight_irradiance(const HeadlightSpec& headlight, double distance) {
  return headlight.luminous_flux / (kLumensPerWatt * beam_area(headlight, distance));
}

double ambient_irradiance(const AmbientLight& ambient) { return ambient.illuminance / kLumensPerWatt; }

}  // namespace arp
