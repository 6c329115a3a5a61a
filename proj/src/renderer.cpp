#include "arp/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arp/error.hpp"
#include "arp/retroreflection.hpp"
#include "arp/rng.hpp"

namespace arp {

std::uint8_t tone_map_value(double linear, double exposure) {
  const double x = std::clamp(linear * exposure, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * std::pow(x, 1.0 / 2.2)));
}

Raster8 tone_map(const RenderedImage& image) {
  if (!(image.exposure > 0.0)) throw InvalidArgument("exposure must be > 0");
  Raster8 out{image.width, image.height, {}};
  out.rgb.reserve(image.pixels.size() * 3);
  for (const Rgb& c : image.pixels) {
    out.rgb.push_back(tone_map_value(c.r, image.exposure));
    out.rgb.push_back(tone_map_value(c.g, image.exposure));
    out.rgb.push_back(tone_map_value(c.b, image.exposure));
  }
  return out;
}

double calibrated_exposure(const SceneConfig& scene) {
  const double target = std::pow(110.0 / 255.0, 2.2);
  const double e_day = ambient_irradiance(scene.day_ambient);
  const double radiance = sheeting_albedo(SheetColor::Red).r * e_day / std::numbers::pi;
  if (!(radiance > 0.0)) throw InvalidArgument("cannot calibrate exposure without daylight");
  return target / radiance;
}

SceneConfig reference_scene(const SignSpec& sign) {
  SceneConfig s;
  s.sign = sign;
  s.exposure = calibrated_exposure(s);
  return s;
}

SceneRenderer::SceneRenderer(const SceneConfig& scene, const MaterialRegistry& registry)
    : scene_(scene), registry_(registry) {
  proj_ = project_sign(scene_);
  const int mx = static_cast<int>(std::lround(0.1 * proj_.bbox_width));
  const int my = static_cast<int>(std::lround(0.1 * proj_.bbox_height));
  x0_ = std::max(0, proj_.bbox_x0 - mx);
  y0_ = std::max(0, proj_.bbox_y0 - my);
  const int x1 = std::min(scene_.camera.pixels_x, proj_.bbox_x1 + mx);
  const int y1 = std::min(scene_.camera.pixels_y, proj_.bbox_y1 + my);
  w_ = x1 - x0_;
  h_ = y1 - y0_;
  if (w_ <= 0 || h_ <= 0) throw OutOfFrustum("empty sign crop");

  const SignLayout& layout = SignLayout::of(scene_.sign);
  const SpectralCurve& illum = illuminant::by_name(scene_.illuminant);
  std::array<MaterialSpec, 3> face;
  for (SheetColor c : all_sheet_colors()) {
    const auto i = static_cast<std::size_t>(c);
    face[i] = registry_.variant(scene_.sign.face_product, c);
    tint_[i] = specular_tint(face[i], illum).rgb();
  }
  face_dop_ = face[0].dop_preservation;

  const double e_day = ambient_irradiance(scene_.day_ambient);
  const double e_night = ambient_irradiance(scene_.night_ambient);
  const CameraFrame cam(scene_);
  const std::size_t n = static_cast<std::size_t>(w_) * static_cast<std::size_t>(h_);
  px_.assign(n, {});
  day_.assign(n, {});
  night_ambient_.assign(n, {});
  night_diffuse_.assign(n, {});
  face_retro_.assign(n, {});
  const double inv_pi = 1.0 / std::numbers::pi;

  for (int y = 0; y < h_; ++y) {
    for (int x = 0; x < w_; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w_ + x;
      const auto uv = cam.face_at(x0_ + x + 0.5, y0_ + y + 0.5);
      const std::uint8_t region = uv ? layout.region_at(uv->first, uv->second) : SignLayout::kOutside;
      if (region == SignLayout::kOutside) {
        day_[i] = Rgb::gray(scene_.background_albedo * e_day * inv_pi);
        night_ambient_[i] = Rgb::gray(scene_.background_albedo * e_night * inv_pi);
        continue;
      }
      Pixel& p = px_[i];
      p.on_sign = true;
      p.color = region;
      p.u = uv->first;
      p.v = uv->second;
      const Vec3 w = scene_.face_point(p.u, p.v);
      const ReflectionGeometry g = reflection_geometry_world(scene_, w);
      const double e = headlight_irradiance_at(scene_, w);
      const double cb = std::cos(g.entrance);
      // r / pi = R' / (cos beta cos upsilon)
      p.retro_scale = e * ior_level(1.0, g.entrance, g.viewing) * inv_pi;
      p.observation = g.observation;
      const MaterialSpec& m = face[region];
      day_[i] = diffuse_radiance(m, e_day, 1.0);
      night_ambient_[i] = diffuse_radiance(m, e_night, 1.0);
      night_diffuse_[i] = diffuse_radiance(m, e, cb);
      face_retro_[i] = tint_[region] * (m.r_prime * p.retro_scale * lobe_falloff(p.observation, m.roughness));
    }
  }
}

RenderedImage SceneRenderer::blank() const {
  RenderedImage img;
  img.width = w_;
  img.height = h_;
  img.exposure = scene_.exposure;
  img.crop_x0 = x0_;
  img.crop_y0 = y0_;
  img.projection = proj_;
  return img;
}

std::vector<std::pair<std::size_t, const ResolvedPatch*>> SceneRenderer::patch_cover(
    const std::vector<ResolvedPatch>& rp) const {
  std::vector<std::pair<std::size_t, const ResolvedPatch*>> out;
  if (rp.empty()) return out;
  for (std::size_t i = 0; i < px_.size(); ++i) {
    const Pixel& p = px_[i];
    if (!p.on_sign) continue;
    for (const auto& r : rp) {
      if (p.color == static_cast<std::uint8_t>(r.color) && r.rect.contains(p.u, p.v)) {
        out.emplace_back(i, &r);
        break;
      }
    }
  }
  return out;
}

std::vector<std::size_t> SceneRenderer::patch_pixels(const PatchParams& patch) const {
  PatchSet set{{patch}, 1.0};
  const auto rp = resolve_patches(set, SignLayout::of(scene_.sign), registry_);
  std::vector<std::size_t> out;
  for (const auto& [i, r] : patch_cover(rp)) out.push_back(i);
  return out;
}

std::vector<std::size_t> SceneRenderer::region_pixels(SheetColor color) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < px_.size(); ++i)
    if (px_[i].on_sign && px_[i].color == static_cast<std::uint8_t>(color)) out.push_back(i);
  return out;
}

RenderedImage SceneRenderer::render_day(const PatchSet& patches) const {
  patches.validate();
  RenderedImage img = blank();
  img.pixels = day_;
  const auto rp = resolve_patches(patches, SignLayout::of(scene_.sign), registry_);
  const double e_day = ambient_irradiance(scene_.day_ambient);
  // Patches carry the albedo of the region they sit on.
  for (const auto& [i, r] : patch_cover(rp)) img.pixels[i] = diffuse_radiance(r->material, e_day, 1.0);
  return img;
}

RenderedImage SceneRenderer::render_night(const PatchSet& patches, const NightOptions& options) const {
  patches.validate();
  options.filters.validate();
  RenderedImage img = blank();
  const double t_amb = ambient_transmission(options.filters);
  const double t_diff = diffuse_headlight_transmission(options.filters);
  const double t_face = retro_transmission(face_dop_, options.filters);
  img.pixels.resize(px_.size());
  for (std::size_t i = 0; i < px_.size(); ++i)
    img.pixels[i] = night_ambient_[i] * t_amb + night_diffuse_[i] * t_diff + face_retro_[i] * t_face;

  const auto rp = resolve_patches(patches, SignLayout::of(scene_.sign), registry_);
  if (rp.empty()) return img;
  const SpectralCurve& illum = illuminant::by_name(scene_.illuminant);
  std::vector<Rgb> tints;
  std::vector<double> t_patch;
  for (const auto& r : rp) {
    tints.push_back(specular_tint(r.material, illum).rgb());
    t_patch.push_back(retro_transmission(r.material.dop_preservation, options.filters));
  }
  const double e_night = ambient_irradiance(scene_.night_ambient);
  const Rgb white = Rgb::gray(1.0 / scene_.exposure);
  for (const auto& [i, r] : patch_cover(rp)) {
    if (options.white_assumption) {
      img.pixels[i] = white;
      continue;
    }
    const auto k = static_cast<std::size_t>(r - rp.data());
    const Pixel& p = px_[i];
    const MaterialSpec& m = r->material;
    const Rgb amb = diffuse_radiance(m, e_night, 1.0);
    const Rgb retro = tints[k] * (m.r_prime * p.retro_scale * lobe_falloff(p.observation, m.roughness));
    img.pixels[i] = amb * t_amb + night_diffuse_[i] * t_diff + retro * t_patch[k];
  }
  return img;
}

RenderedImage render_day(const SceneConfig& scene, const PatchSet& patches, const MaterialRegistry& registry) {
  return SceneRenderer(scene, registry).render_day(patches);
}

RenderedImage render_night(const SceneConfig& scene, const PatchSet& patches, const NightOptions& options,
                           const MaterialRegistry& registry) {
  return SceneRenderer(scene, registry).render_night(patches, options);
}

SceneConfig apply_eot(const SceneConfig& scene, std::uint64_t seed, const EotConfig& eot) {
  Rng rng(mix_seed(seed));
  SceneConfig s = scene;
  s.headlight.luminous_flux *= rng.uniform(1.0 - eot.flux_jitter, 1.0 + eot.flux_jitter);
  const double amb = rng.uniform(1.0 - eot.ambient_jitter, 1.0 + eot.ambient_jitter);
  s.day_ambient.illuminance *= amb;
  s.night_ambient.illuminance *= amb;
  s.camera_yaw += rng.uniform(-eot.angle_jitter, eot.angle_jitter);
  s.camera_pitch += rng.uniform(-eot.angle_jitter, eot.angle_jitter);
  s.d_lon += rng.uniform(-eot.distance_jitter, eot.distance_jitter);
  return s;
}

}  // namespace arp
