#include <doctest.h>

#include <filesystem>

#include "arp/colorimetry.hpp"
#include "arp/error.hpp"
#include "arp/material.hpp"
#include "arp/rng.hpp"
#include "support.hpp"

using namespace arp;
using arp::testing::rel_close;

namespace {

SpectralCurve random_curve(Rng& rng, double hi = 1.0) {
  std::vector<double> v(kGridSize);
  for (auto& x : v) x = rng.uniform(0.0, hi);
  return SpectralCurve::on_grid(v);
}

// Plain summation on the 5 nm grid, written out independently.
Xyz oracle_xyz(const SpectralCurve& s, const SpectralCurve& r) {
  const auto& o = CieObserver::cie1931();
  double norm = 0, X = 0, Y = 0, Z = 0;
  for (int i = 0; i < kGridSize; ++i) {
    const double wl = kGridStart + kGridStep * i;
    norm += s.at(wl) * o.ybar.at(wl);
    X += s.at(wl) * r.at(wl) * o.xbar.at(wl);
    Y += s.at(wl) * r.at(wl) * o.ybar.at(wl);
    Z += s.at(wl) * r.at(wl) * o.zbar.at(wl);
  }
  const double k = 100.0 / norm;
  return {k * X, k * Y, k * Z};
}

}  // namespace

TEST_SUITE("colorimetry") {
  TEST_CASE("observer tables") {
    const auto& o = CieObserver::cie1931();
    double peak_wl = 0, peak = -1;
    for (int i = 0; i < kGridSize; ++i) {
      const double wl = kGridStart + kGridStep * i;
      CHECK(o.xbar.at(wl) >= 0.0);
      CHECK(o.ybar.at(wl) >= 0.0);
      CHECK(o.zbar.at(wl) >= 0.0);
      if (o.ybar.at(wl) > peak) peak = o.ybar.at(wl), peak_wl = wl;
    }
    CHECK(peak_wl >= 550.0);
    CHECK(peak_wl <= 560.0);
  }

  TEST_CASE("normalization constant of the equal-energy illuminant") {
    double sum = 0;
    for (int i = 0; i < kGridSize; ++i) sum += CieObserver::cie1931().ybar.at(kGridStart + kGridStep * i);
    CHECK(rel_close(normalization_constant(illuminant::equal_energy()), 100.0 / sum, 1e-12));
  }

  TEST_CASE("zero illuminant") {
    CHECK_THROWS_AS(normalization_constant(SpectralCurve::constant(0.0)), ZeroIlluminant);
  }

  TEST_CASE("perfect reflector gives Y = 100 under every built-in") {
    for (const char* n : {"E", "D65", "LED"}) {
      CAPTURE(n);
      const Xyz xyz = xyz_from_spectra(illuminant::by_name(n), SpectralCurve::constant(1.0));
      CHECK(rel_close(xyz.Y, 100.0, 1e-9));
    }
    CHECK_THROWS_AS(illuminant::by_name("F2"), InvalidArgument);
  }

  TEST_CASE("black reflector") {
    const Xyz xyz = xyz_from_spectra(illuminant::d65(), SpectralCurve::constant(0.0));
    CHECK(xyz.X == 0.0);
    CHECK(xyz.Y == 0.0);
    CHECK(xyz.Z == 0.0);
  }

  TEST_CASE("red sheeting under the LED matches direct summation") {
    const auto& red = sheeting_reflectance(SheetColor::Red);
    const Xyz a = xyz_from_spectra(illuminant::white_led(), red);
    const Xyz b = oracle_xyz(illuminant::white_led(), red);
    CHECK(rel_close(a.X, b.X, 1e-6));
    CHECK(rel_close(a.Y, b.Y, 1e-6));
    CHECK(rel_close(a.Z, b.Z, 1e-6));
  }

  TEST_CASE("sRGB conversion") {
    const TintColor w = xyz_to_linear_srgb({95.047, 100.0, 108.883});
    CHECK(w.rgb().r == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(w.rgb().g == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(w.rgb().b == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(xyz_to_linear_srgb({0, 0, 0}).rgb() == Rgb{});

    // Equal-energy white through the IEC 61966-2-1 matrix by hand.
    const Xyz e = xyz_from_spectra(illuminant::equal_energy(), SpectralCurve::constant(1.0));
    const double X = e.X / 100, Y = e.Y / 100, Z = e.Z / 100;
    const Rgb got = xyz_to_linear_srgb_unclamped(e);
    CHECK(got.r == doctest::Approx(3.2406 * X - 1.5372 * Y - 0.4986 * Z).epsilon(1e-9));
    CHECK(got.g == doctest::Approx(-0.9689 * X + 1.8758 * Y + 0.0415 * Z).epsilon(1e-9));
    CHECK(got.b == doctest::Approx(0.0557 * X - 0.2040 * Y + 1.0570 * Z).epsilon(1e-9));
  }

  TEST_CASE("out-of-gamut values clamp") {
    const TintColor c = xyz_to_linear_srgb({200.0, 100.0, 0.0});
    CHECK(c.rgb().max_component() <= 1.0);
    CHECK(c.rgb().min_component() >= 0.0);
  }

  TEST_CASE("specular tint") {
    MaterialSpec m;
    m.name = "probe";
    m.tint = TintColor(1, 1, 1);
    CHECK(specular_tint(m, illuminant::white_led()) == TintColor(1, 1, 1));

    MaterialSpec bare;
    bare.name = "bare";
    CHECK_THROWS_AS(specular_tint(bare, illuminant::white_led()), MissingSpectralData);

    MaterialSpec white;
    white.reflectance = SpectralCurve::constant(0.9);
    const Rgb t = specular_tint(white, illuminant::white_led()).rgb();
    // A flat reflector takes the illuminant's own color, scaled, then clamped.
    const Rgb u = TintColor(
        xyz_to_linear_srgb_unclamped(xyz_from_spectra(illuminant::white_led(), SpectralCurve::constant(0.9)))).rgb();
    CHECK(t == u);
    const Rgb raw = xyz_to_linear_srgb_unclamped(xyz_from_spectra(illuminant::white_led(), SpectralCurve::constant(1.0)));
    CHECK(raw.luminance() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(t.g == doctest::Approx(0.9 * raw.g).epsilon(1e-12));

    MaterialSpec red;
    red.reflectance = sheeting_reflectance(SheetColor::Red);
    const Rgb r = specular_tint(red, illuminant::white_led()).rgb();
    CHECK(r.r > r.g);
    CHECK(r.r > r.b);
  }

  TEST_CASE("linearity and monotonicity on random curves") {
    Rng rng(99);
    for (int k = 0; k < 200; ++k) {
      const SpectralCurve r1 = random_curve(rng), r2 = random_curve(rng);
      const double a = rng.uniform(0, 2), b = rng.uniform(0, 2);
      std::vector<double> mix(kGridSize), hi(kGridSize);
      for (int i = 0; i < kGridSize; ++i) {
        mix[i] = a * r1.values()[i] + b * r2.values()[i];
        hi[i] = r1.values()[i] + rng.uniform(0.0, 0.5);
      }
      const auto& s = illuminant::white_led();
      const Xyz x1 = xyz_from_spectra(s, r1), x2 = xyz_from_spectra(s, r2);
      const Xyz xm = xyz_from_spectra(s, SpectralCurve::on_grid(mix));
      CHECK(rel_close(xm.X, a * x1.X + b * x2.X, 1e-9));
      CHECK(rel_close(xm.Y, a * x1.Y + b * x2.Y, 1e-9));
      CHECK(rel_close(xm.Z, a * x1.Z + b * x2.Z, 1e-9));
      CHECK(xyz_from_spectra(s, SpectralCurve::on_grid(hi)).Y >= x1.Y);
    }
  }

  TEST_CASE("curve sampling") {
    const SpectralCurve c({{400.0, 1.0}, {500.0, 3.0}});
    CHECK(c.at(450.0) == doctest::Approx(2.0));
    CHECK(c.at(399.0) == 0.0);
    CHECK(c.at(501.0) == 0.0);
    CHECK_THROWS_AS(SpectralCurve({{500.0, 1.0}, {400.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(SpectralCurve({{400.0, -1.0}, {500.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(SpectralCurve({{400.0, 1.6}, {500.0, 1.0}}).check_reflectance(), InvalidArgument);
    CHECK_THROWS_AS(SpectralCurve({{900.0, 1.0}, {950.0, 1.0}}).resample(), GridMismatch);
  }

  TEST_CASE("resampling a gridded curve is the identity") {
    Rng rng(5);
    const SpectralCurve c = random_curve(rng);
    CHECK(c.is_standard_grid());
    CHECK(c.resample() == c);
  }

  TEST_CASE("csv round trip") {
    Rng rng(6);
    const SpectralCurve c = random_curve(rng);
    const auto path = arp::testing::temp_dir("curve") + "/c.csv";
    c.save_csv(path);
    CHECK(SpectralCurve::load_csv(path) == c);
    CHECK_THROWS_AS(SpectralCurve::load_csv(path + ".missing"), IoError);
  }
}
