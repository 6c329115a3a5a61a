#pragma once

#include <algorithm>
#include <cmath>

namespace arp {

/// Linear RGB triple. Used for radiance, albedo and tint alike.
struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  constexpr Rgb() = default;
  constexpr Rgb(double red, double green, double blue) : r(red), g(green), b(blue) {}
  static constexpr Rgb gray(double v) { return {v, v, v}; }

  constexpr Rgb& operator+=(const Rgb& o) {
    r += o.r;
    g += o.g;
    b += o.b;
    return *this;
  }
  friend constexpr Rgb operator+(Rgb a, const Rgb& o) { return a += o; }
  friend constexpr Rgb operator-(const Rgb& a, const Rgb& o) { return {a.r - o.r, a.g - o.g, a.b - o.b}; }
  friend constexpr Rgb operator*(const Rgb& a, double s) { return {a.r * s, a.g * s, a.b * s}; }
  friend constexpr Rgb operator*(double s, const Rgb& a) { return a * s; }
  friend constexpr Rgb operator*(const Rgb& a, const Rgb& o) { return {a.r * o.r, a.g * o.g, a.b * o.b}; }
  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;

  constexpr double max_component() const { return std::max({r, g, b}); }
  constexpr double min_component() const { return std::min({r, g, b}); }
  /// Rec. 709 luminance weights.
  constexpr double luminance() const { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }
  double norm() const { return std::sqrt(r * r + g * g + b * b); }
};

inline double distance(const Rgb& a, const Rgb& b) { return (a - b).norm(); }

inline Rgb clamp01(const Rgb& c) {
  return {std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
}

/// Linear sRGB color whose components are clamped to [0, 1] on construction.
class TintColor {
 public:
  constexpr TintColor() = default;
  explicit TintColor(const Rgb& rgb) : rgb_(clamp01(rgb)) {}
  TintColor(double r, double g, double b) : TintColor(Rgb{r, g, b}) {}

  const Rgb& rgb() const { return rgb_; }
  friend bool operator==(const TintColor&, const TintColor&) = default;

 private:
  Rgb rgb_{};
};

}  // namespace arp
