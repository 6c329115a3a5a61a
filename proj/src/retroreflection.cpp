#include "arp/retroreflection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arp/error.hpp"

namespace arp {

double ior_level(double r_prime, double entrance, double viewing) {
  const double c = std::cos(entrance) * std::cos(viewing);
  if (!(c >= 1e-6)) throw GrazingAngle("cos(beta) * cos(upsilon) = " + std::to_string(c));
  return std::numbers::pi * r_prime / c;
}

double ior_level(const MaterialSpec& material, const ReflectionGeometry& geom) {
  return ior_level(material.r_prime, geom.entrance, geom.viewing);
}

double ior_level_approx(double r_prime, double d_lon, double d_lat, double dh) {
  return std::numbers::pi * r_prime * (1.0 + (d_lat * d_lat + dh * dh) / (d_lon * d_lon));
}

double lobe_falloff(double observation, double roughness) {
  const double t = observation / (roughness * kSigmaMax);
  return std::exp(-t * t);
}

Rgb retro_radiance(const Rgb& tint, double r_prime, double roughness, const ReflectionGeometry& geom,
                   double irradiance) {
  const double r = ior_level(r_prime, geom.entrance, geom.viewing);
  if (irradiance == 0.0) return {};
  return tint * (r / std::numbers::pi * irradiance * lobe_falloff(geom.observation, roughness));
}

Rgb retro_radiance(const MaterialSpec& material, const ReflectionGeometry& geom, double irradiance,
                   const SpectralCurve& illuminant) {
  if (irradiance < 0.0) throw InvalidArgument("irradiance must be >= 0");
  return retro_radiance(specular_tint(material, illuminant).rgb(), material.r_prime, material.roughness, geom,
                        irradiance);
}

Rgb diffuse_radiance(const MaterialSpec& material, double irradiance, double cos_incidence) {
  return material.diffuse_albedo * (irradiance * cos_incidence / std::numbers::pi);
}

Rgb simulated_night_color(const MaterialSpec& material, const SceneConfig& scene) {
  const Vec3 p = scene.sign_center();
  const ReflectionGeometry g = reflection_geometry_world(scene, p);
  const double e = headlight_irradiance_at(scene, p);
  const SpectralCurve& illum = illuminant::by_name(scene.illuminant);
  Rgb rad = retro_radiance(material, g, e, illum);
  rad += diffuse_radiance(material, e, std::cos(g.entrance));
  rad += diffuse_radiance(material, ambient_irradiance(scene.night_ambient), 1.0);
  return clamp01(rad * scene.exposure);
}

RoughnessFit fit_roughness(const MaterialSpec& material, const TintColor& observed, const SceneConfig& scene) {
  if (observed.rgb() == Rgb{}) throw DegenerateObservation("observed color is all zero");
  scene.validate();
  const Vec3 p = scene.sign_center();
  const ReflectionGeometry g = reflection_geometry_world(scene, p);
  const double e = headlight_irradiance_at(scene, p);
  const Rgb tint = specular_tint(material, illuminant::by_name(scene.illuminant)).rgb();
  const Rgb base = diffuse_radiance(material, e, std::cos(g.entrance)) +
                   diffuse_radiance(material, ambient_irradiance(scene.night_ambient), 1.0);
  auto residual = [&](double alpha) {
    const Rgb c = clamp01((base + retro_radiance(tint, material.r_prime, alpha, g, e)) * scene.exposure);
    return distance(c, observed.rgb());
  };

  constexpr int kGrid = 1000;
  int best = 1;
  double best_res = residual(1.0 / kGrid);
  for (int i = 2; i <= kGrid; ++i) {
    const double r = residual(static_cast<double>(i) / kGrid);
    if (r < best_res) {
      best_res = r;
      best = i;
    }
  }
  RoughnessFit fit{static_cast<double>(best) / kGrid, best_res};

  // Golden-section refinement inside the neighbouring grid cells.
  double lo = std::max(1e-6, static_cast<double>(best - 1) / kGrid);
  double hi = std::min(1.0, static_cast<double>(best + 1) / kGrid);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
  double fa = residual(a), fb = residual(b);
  for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = residual(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = residual(b);
    }
  }
  const double cand = 0.5 * (lo + hi);
  const double cand_res = residual(cand);
  if (cand_res < fit.residual) fit = {cand, cand_res};
  return fit;
}

TintColor linear_from_display(int r, int g, int b) {
  auto lin = [](int c) { return std::pow(std::clamp(c, 0, 255) / 255.0, 2.2); };
  return TintColor(lin(r), lin(g), lin(b));
}

double ior_distance_variation(const SceneConfig& scene, double d_min, double d_max) {
  if (!(d_min > 0.0) || !(d_max > d_min)) throw InvalidDistance("need 0 < d_min < d_max");
  auto r_at = [&](double d) {
    SceneConfig s = scene;
    s.d_lon = d;
    const ReflectionGeometry g = reflection_geometry_world(s, s.sign_center());
    return ior_level(1.0, g.entrance, g.viewing);
  };
  const double ref = r_at(d_max);
  double worst = 0.0;
  for (double d = d_min; d < d_max; d += 1.0) worst = std::max(worst, std::abs(r_at(d) - ref) / ref);
  return worst;
}

}  // namespace arp
