#pragma once

namespace arp {

/// Luminous efficacy used for every lumen/lux to watt conversion.
inline constexpr double kLumensPerWatt = 683.0;

struct HeadlightSpec {
  double luminous_flux = 3400.0;  // lm
  double spread_half_angle = 0.087266462599716474;  // rad (5 degrees)
  double mount_height = 0.75;  // m

  /// Throws InvalidArgument if any field is out of range. Zero flux is
  /// accepted (headlight off).
  void validate() const;
};

struct AmbientLight {
  double illuminance = 0.0;  // lux
  void validate() const;
};

double beam_area(const HeadlightSpec& headlight, double distance);
double headlight_irradiance(const HeadlightSpec& headlight, double distance);
double ambient_irradiance(const AmbientLight& ambient);

}  // namespace arp
