#pragma once

#include "arp/material.hpp"
#include "arp/scene.hpp"

namespace arp {

/// Lobe width at roughness 1.
inline constexpr double kSigmaMax = 0.1;  // rad

/// r = pi R' / (cos beta cos upsilon). Throws GrazingAngle when the cosine
/// product drops below 1e-6.
double ior_level(double r_prime, double entrance, double viewing);
double ior_level(const MaterialSpec& material, const ReflectionGeometry& geom);

/// Small-angle form pi R' (1 + eps^2 / d_lon^2), eps^2 = d_lat^2 + (h_s - h_l)^2.
double ior_level_approx(double r_prime, double d_lon, double d_lat, double dh);

/// Peak-normalized Gaussian lobe exp(-(theta / (roughness * kSigmaMax))^2).
double lobe_falloff(double observation, double roughness);

/// tint * (r / pi) * irradiance * falloff.
Rgb retro_radiance(const Rgb& tint, double r_prime, double roughness, const ReflectionGeometry& geom,
                   double irradiance);
Rgb retro_radiance(const MaterialSpec& material, const ReflectionGeometry& geom, double irradiance,
                   const SpectralCurve& illuminant);

/// Lambertian term: albedo * irradiance * cos / pi.
Rgb diffuse_radiance(const MaterialSpec& material, double irradiance, double cos_incidence);

/// Clamped, exposed color of a material patch at the sign center under the
/// scene's night illumination (headlight plus night ambient).
Rgb simulated_night_color(const MaterialSpec& material, const SceneConfig& scene);

struct RoughnessFit {
  double roughness = 1.0;
  double residual = 0.0;  // linear RGB L2 distance
};

/// Grid search over 1000 roughness values followed by golden-section
/// refinement around the best grid point. The observation is linear RGB.
RoughnessFit fit_roughness(const MaterialSpec& material, const TintColor& observed, const SceneConfig& scene);

/// 8-bit display color to linear RGB, inverting the 1/2.2 tone curve.
TintColor linear_from_display(int r, int g, int b);

/// max |r(d) - r(d_max)| / r(d_max) over a 1 m grid of d_lon in [d_min, d_max],
/// using exact cosines at the sign center.
double ior_distance_variation(const SceneConfig& scene, double d_min, double d_max);

}  // namespace arp
