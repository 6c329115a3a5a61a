#include "arp/colorimetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "arp/error.hpp"
#include "cie_tables.hpp"

namespace arp {

namespace {

double grid_wavelength(int i) { return kGridStart + kGridStep * i; }

}  // namespace

SpectralCurve::SpectralCurve(std::vector<std::pair<double, double>> samples) {
  if (samples.empty()) throw InvalidArgument("spectral curve has no samples");
  wl_.reserve(samples.size());
  val_.reserve(samples.size());
  for (const auto& [w, v] : samples) {
    if (!std::isfinite(w) || !std::isfinite(v)) throw InvalidArgument("spectral curve has non-finite sample");
    if (v < 0.0) throw InvalidArgument("spectral curve has negative value");
    if (!wl_.empty() && w <= wl_.back()) throw InvalidArgument("wavelengths must be strictly increasing");
    wl_.push_back(w);
    val_.push_back(v);
  }
}

SpectralCurve SpectralCurve::on_grid(const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(kGridSize))
    throw InvalidArgument("grid curve needs 81 values, got " + std::to_string(values.size()));
  std::vector<std::pair<double, double>> s;
  s.reserve(values.size());
  for (int i = 0; i < kGridSize; ++i) s.emplace_back(grid_wavelength(i), values[static_cast<std::size_t>(i)]);
  return SpectralCurve(std::move(s));
}

SpectralCurve SpectralCurve::constant(double value) { return on_grid(std::vector<double>(kGridSize, value)); }

double SpectralCurve::at(double wavelength) const {
  if (wl_.empty() || wavelength < wl_.front() || wavelength > wl_.back()) return 0.0;
  auto it = std::lower_bound(wl_.begin(), wl_.end(), wavelength);
  auto i = static_cast<std::size_t>(it - wl_.begin());
  if (wl_[i] == wavelength) return val_[i];
  const double t = (wavelength - wl_[i - 1]) / (wl_[i] - wl_[i - 1]);
  return val_[i - 1] + t * (val_[i] - val_[i - 1]);
}

SpectralCurve SpectralCurve::resample(double start, double stop, double step) const {
  if (!(step > 0.0) || !(stop >= start)) throw GridMismatch("invalid resampling grid");
  if (wl_.empty() || wl_.back() < start || wl_.front() > stop)
    throw GridMismatch("curve range does not overlap the target grid");
  const auto n = static_cast<int>(std::llround((stop - start) / step)) + 1;
  std::vector<std::pair<double, double>> s;
  s.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double w = start + step * i;
    s.emplace_back(w, at(w));
  }
  return SpectralCurve(std::move(s));
}

bool SpectralCurve::is_standard_grid() const {
  if (wl_.size() != static_cast<std::size_t>(kGridSize)) return false;
  for (int i = 0; i < kGridSize; ++i)
    if (wl_[static_cast<std::size_t>(i)] != grid_wavelength(i)) return false;
  return true;
}

std::vector<double> SpectralCurve::grid_values() const {
  if (is_standard_grid()) return val_;
  return resample().val_;
}

double SpectralCurve::max_value() const {
  return val_.empty() ? 0.0 : *std::max_element(val_.begin(), val_.end());
}

void SpectralCurve::check_reflectance() const {
  if (max_value() > 1.5) throw InvalidArgument("reflectance exceeds 1.5");
}

SpectralCurve SpectralCurve::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "wavelength_nm,value") throw InvalidArgument(path + ": expected header wavelength_nm,value");
  std::vector<std::pair<double, double>> s;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidArgument(path + ": malformed row " + std::to_string(row));
    try {
      std::size_t used = 0;
      const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
      const double w = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      const double v = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
      s.emplace_back(w, v);
    } catch (const std::logic_error&) {
      throw InvalidArgument(path + ": malformed number on row " + std::to_string(row));
    }
  }
  return SpectralCurve(std::move(s));
}

void SpectralCurve::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "wavelength_nm,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < wl_.size(); ++i) out << wl_[i] << ',' << val_[i] << '\n';
}

const CieObserver& CieObserver::cie1931() {
  static const CieObserver obs = [] {
    std::vector<double> x, y, z;
    for (const auto& row : tables::kCie1931) {
      x.push_back(row[0]);
      y.push_back(row[1]);
      z.push_back(row[2]);
    }
    return CieObserver{SpectralCurve::on_grid(x), SpectralCurve::on_grid(y), SpectralCurve::on_grid(z)};
  }();
  return obs;
}

namespace illuminant {

const SpectralCurve& equal_energy() {
  static const SpectralCurve c = SpectralCurve::constant(1.0);
  return c;
}

const SpectralCurve& d65() {
  static const SpectralCurve c = SpectralCurve::on_grid({tables::kD65.begin(), tables::kD65.end()});
  return c;
}

const SpectralCurve& white_led() {
  static const SpectralCurve c = SpectralCurve::on_grid({tables::kWhiteLed.begin(), tables::kWhiteLed.end()});
  return c;
}

const SpectralCurve& by_name(const std::string& name) {
  if (name == "E") return equal_energy();
  if (name == "D65") return d65();
  if (name == "LED") return white_led();
  throw InvalidArgument("unknown illuminant '" + name + "'");
}

}  // namespace illuminant

double normalization_constant(const SpectralCurve& illum, const CieObserver& obs) {
  const auto s = illum.grid_values();
  const auto y = obs.ybar.grid_values();
  double sum = 0.0;
  for (int i = 0; i < kGridSize; ++i) sum += s[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
  if (!(sum > 0.0)) throw ZeroIlluminant("illuminant has no overlap with ybar");
  return 100.0 / sum;
}

Xyz xyz_from_spectra(const SpectralCurve& illum, const SpectralCurve& refl, const CieObserver& obs) {
  const double k = normalization_constant(illum, obs);
  const auto s = illum.grid_values();
  const auto r = refl.grid_values();
  const auto x = obs.xbar.grid_values();
  const auto y = obs.ybar.grid_values();
  const auto z = obs.zbar.grid_values();
  Xyz out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(kGridSize); ++i) {
    const double sr = s[i] * r[i];
    out.X += sr * x[i];
    out.Y += sr * y[i];
    out.Z += sr * z[i];
  }
  out.X *= k;
  out.Y *= k;
  out.Z *= k;
  return out;
}

Rgb xyz_to_linear_srgb_unclamped(const Xyz& xyz) {
  const double X = xyz.X / 100.0, Y = xyz.Y / 100.0, Z = xyz.Z / 100.0;
  return {3.2406 * X - 1.5372 * Y - 0.4986 * Z,
          -0.9689 * X + 1.8758 * Y + 0.0415 * Z,
          0.0557 * X - 0.2040 * Y + 1.0570 * Z};
}

TintColor xyz_to_linear_srgb(const Xyz& xyz) {
  Rgb c = xyz_to_linear_srgb_unclamped(xyz);
  if (std::isnan(c.r)) c.r = 0.0;
  if (std::isnan(c.g)) c.g = 0.0;
  if (std::isnan(c.b)) c.b = 0.0;
  return TintColor(c);
}

}  // namespace arp
