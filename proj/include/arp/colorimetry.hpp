#pragma once

#include <string>
#include <utility>
#include <vector>

#include "arp/color.hpp"

namespace arp {

/// Standard integration grid: 380..780 nm in 5 nm steps.
inline constexpr double kGridStart = 380.0;
inline constexpr double kGridStop = 780.0;
inline constexpr double kGridStep = 5.0;
inline constexpr int kGridSize = 81;

/// Piecewise-linear sampled spectrum. Evaluates to 0 outside its range.
class SpectralCurve {
 public:
  SpectralCurve() = default;
  /// Throws InvalidArgument unless wavelengths strictly increase and all
  /// values are finite and nonnegative.
  explicit SpectralCurve(std::vector<std::pair<double, double>> samples);

  static SpectralCurve on_grid(const std::vector<double>& values);
  static SpectralCurve constant(double value);

  double at(double wavelength) const;
  /// Linear resampling onto an arbitrary uniform grid. Throws GridMismatch
  /// if the curve does not overlap [start, stop].
  SpectralCurve resample(double start = kGridStart, double stop = kGridStop, double step = kGridStep) const;
  /// Values on the standard grid, resampling only when needed.
  std::vector<double> grid_values() const;

  bool empty() const { return wl_.empty(); }
  std::size_t size() const { return wl_.size(); }
  const std::vector<double>& wavelengths() const { return wl_; }
  const std::vector<double>& values() const { return val_; }
  double max_value() const;
  bool is_standard_grid() const;

  /// Reflectance curves may not exceed 1.5 (fluorescent headroom).
  void check_reflectance() const;

  static SpectralCurve load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  friend bool operator==(const SpectralCurve&, const SpectralCurve&) = default;

 private:
  std::vector<double> wl_;
  std::vector<double> val_;
};

/// CIE 1931 2-degree observer at 5 nm.
struct CieObserver {
  SpectralCurve xbar;
  SpectralCurve ybar;
  SpectralCurve zbar;

  static const CieObserver& cie1931();
};

struct Xyz {
  double X = 0.0;
  double Y = 0.0;
  double Z = 0.0;
};

namespace illuminant {
const SpectralCurve& equal_energy();
const SpectralCurve& d65();
/// Phosphor-converted white LED stand-in (blue pump + broad phosphor band).
const SpectralCurve& white_led();
/// Lookup by name ("E", "D65", "LED"); throws InvalidArgument otherwise.
const SpectralCurve& by_name(const std::string& name);
}  // namespace illuminant

/// k = 100 / sum S*ybar. Throws ZeroIlluminant if the sum is zero.
double normalization_constant(const SpectralCurve& illum, const CieObserver& obs = CieObserver::cie1931());

Xyz xyz_from_spectra(const SpectralCurve& illum, const SpectralCurve& refl,
                     const CieObserver& obs = CieObserver::cie1931());

/// Linear sRGB (D65) after scaling Y=100 to 1, clamped to [0,1].
TintColor xyz_to_linear_srgb(const Xyz& xyz);
/// Same transform without the clamp.
Rgb xyz_to_linear_srgb_unclamped(const Xyz& xyz);

}  // namespace arp
