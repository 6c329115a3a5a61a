#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "arp/patch.hpp"
#include "arp/polarization.hpp"
#include "arp/scene.hpp"

namespace arp {

/// Linear radiance raster of the sign crop.
struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major
  double exposure = 1.0;
  int crop_x0 = 0;  // crop origin in the full frame
  int crop_y0 = 0;
  SignProjection projection;

  const Rgb& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const RenderedImage& a, const RenderedImage& b) {
    return a.width == b.width && a.height == b.height && a.pixels == b.pixels && a.exposure == b.exposure;
  }
};

/// 8-bit sRGB raster, interleaved RGB.
struct Raster8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

struct NightOptions {
  /// Patch pixels become exactly 1 after exposure (uniformly white reflections).
  bool white_assumption = false;
  PolarizerConfig filters{};
};

/// Per-channel 255 * clamp(x * exposure)^(1/2.2), rounded.
Raster8 tone_map(const RenderedImage& image);
std::uint8_t tone_map_value(double linear, double exposure);

/// Exposure placing the daytime red face at display value 110 in red.
double calibrated_exposure(const SceneConfig& scene);
/// Default scene for a sign with calibrated exposure.
SceneConfig reference_scene(const SignSpec& sign = SignSpec::stop());

/// Per-scene renderer. Geometry, face shading and patch-independent terms
/// are computed once; renders then only composite patches.
class SceneRenderer {
 public:
  explicit SceneRenderer(const SceneConfig& scene, const MaterialRegistry& registry = MaterialRegistry::builtin());

  RenderedImage render_day(const PatchSet& patches) const;
  RenderedImage render_night(const PatchSet& patches, const NightOptions& options = {}) const;

  const SceneConfig& scene() const { return scene_; }
  int width() const { return w_; }
  int height() const { return h_; }
  /// Crop pixels covered by the patch set (stealth-clipped).
  std::vector<std::size_t> patch_pixels(const PatchParams& patch) const;
  /// Crop pixels on the sign face whose region is `color`.
  std::vector<std::size_t> region_pixels(SheetColor color) const;

 private:
  struct Pixel {
    bool on_sign = false;
    std::uint8_t color = 0;
    double u = 0, v = 0;
    double retro_scale = 0;  // E / (cos beta cos upsilon) for the retro term
    double observation = 0;
  };
  SceneConfig scene_;
  MaterialRegistry registry_;
  int w_ = 0, h_ = 0;
  int x0_ = 0, y0_ = 0;
  SignProjection proj_;
  std::vector<Pixel> px_;
  // Patch-independent terms per pixel.
  std::vector<Rgb> day_, night_ambient_, night_diffuse_, face_retro_;
  std::array<Rgb, 3> tint_{};
  double face_dop_ = 0.0;

  RenderedImage blank() const;
  std::vector<std::pair<std::size_t, const ResolvedPatch*>> patch_cover(const std::vector<ResolvedPatch>& rp) const;
};

RenderedImage render_day(const SceneConfig& scene, const PatchSet& patches,
                         const MaterialRegistry& registry = MaterialRegistry::builtin());
RenderedImage render_night(const SceneConfig& scene, const PatchSet& patches, const NightOptions& options = {},
                           const MaterialRegistry& registry = MaterialRegistry::builtin());

/// Ranges of the random environment transformation. Zero widths give the
/// identity.
struct EotConfig {
  double flux_jitter = 0.3;  // multiplier U[1-j, 1+j]
  double ambient_jitter = 0.3;
  double angle_jitter = 0.05235987755982988;  // rad (3 degrees) for yaw and pitch
  double distance_jitter = 2.0;  // m
  static EotConfig identity() { return {0.0, 0.0, 0.0, 0.0}; }
};

SceneConfig apply_eot(const SceneConfig& scene, std::uint64_t seed, const EotConfig& eot = {});

}  // namespace arp
