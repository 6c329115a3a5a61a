#include <doctest.h>

#include <cmath>

#include "arp/defense.hpp"
#include "arp/error.hpp"
#include "arp/image_io.hpp"
#include "arp/renderer.hpp"
#include "arp/rng.hpp"
#include "support.hpp"

using namespace arp;

namespace {

double l2(const RenderedImage& a, const RenderedImage& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const Rgb d = a.pixels[i] - b.pixels[i];
    s += d.r * d.r + d.g * d.g + d.b * d.b;
  }
  return std::sqrt(s);
}

double norm(const RenderedImage& a) {
  double s = 0;
  for (const auto& p : a.pixels) s += p.r * p.r + p.g * p.g + p.b * p.b;
  return std::sqrt(s);
}

PatchSet random_conformant(Rng& rng, const std::string& product) {
  const double mpr = rng.uniform(0.05, 0.25);
  const int n = 1 + static_cast<int>(rng.index(3));
  PatchSet set{{}, mpr};
  for (int tries = 0; tries < 100 && static_cast<int>(set.patches.size()) < n; ++tries) {
    const double side = std::sqrt(mpr / n) * rng.uniform(0.3, 1.0);
    PatchParams p{rng.uniform(side / 2, 1 - side / 2), rng.uniform(side / 2, 1 - side / 2), side, side, product};
    PatchSet trial = set;
    trial.patches.push_back(p);
    if (trial.conformant()) set = trial;
  }
  return set;
}

}  // namespace

TEST_SUITE("renderer") {
  TEST_CASE("empty patch set renders bit-identical to benign") {
    const SceneConfig s = reference_scene();
    const RenderedImage a = render_day(s, PatchSet{});
    const RenderedImage b = render_day(s, PatchSet{{}, 0.2});
    CHECK(a == b);
    CHECK(a.pixels == b.pixels);
    CHECK(render_night(s, PatchSet{}) == render_night(s, PatchSet{{}, 0.2}));
  }

  TEST_CASE("stealth bound for conformant patch sets") {
    Rng rng(3);
    const SceneConfig s = reference_scene();
    const SceneRenderer r(s);
    const RenderedImage benign = r.render_day({});
    for (int k = 0; k < 20; ++k) {
      const PatchSet set = random_conformant(rng, k % 2 ? "DG4090" : "NittoL");
      REQUIRE(set.conformant());
      CHECK(l2(r.render_day(set), benign) <= 0.01 * norm(benign));
    }
  }

  TEST_CASE("dark scenes") {
    SceneConfig s = reference_scene();
    s.day_ambient.illuminance = 0.0;
    for (const auto& p : render_day(s, {}).pixels) CHECK(p == Rgb{});
    SceneConfig n = reference_scene();
    n.night_ambient.illuminance = 0.0;
    n.headlight.luminous_flux = 0.0;
    const PatchSet set{{{0.5, 0.3, 0.2, 0.2, "DG4090"}}, 0.1875};
    for (const auto& p : render_night(n, set).pixels) CHECK(p == Rgb{});
  }

  TEST_CASE("night light terms add") {
    const SceneConfig s = reference_scene();
    SceneConfig no_head = s, no_amb = s;
    no_head.headlight.luminous_flux = 0.0;
    no_amb.night_ambient.illuminance = 0.0;
    const PatchSet set{{{0.5, 0.3, 0.2, 0.2, "DG4090"}}, 0.1875};
    const RenderedImage full = render_night(s, set), a = render_night(no_head, set), h = render_night(no_amb, set);
    for (std::size_t i = 0; i < full.pixels.size(); ++i) {
      const Rgb sum = a.pixels[i] + h.pixels[i];
      CHECK(full.pixels[i].g == doctest::Approx(sum.g).epsilon(1e-12));
    }
  }

  TEST_CASE("prism patch on a white region is much brighter than the region") {
    const SceneConfig s = reference_scene();
    const SceneRenderer r(s);
    const PatchParams p = arp::testing::patch_on(s.sign, SheetColor::White, 0.06, 0.12, "DG4090");
    const PatchSet set{{p}, 0.1875};
    REQUIRE(set.conformant());
    CHECK(patch_contrast(r, r.render_night(set), p) > 2.0);
  }

  TEST_CASE("higher R' never darkens patch pixels") {
    const SceneConfig s = reference_scene();
    auto reg = MaterialRegistry::builtin();
    const PatchParams p{0.5, 0.3, 0.25, 0.2, "DG4090"};
    const PatchSet set{{p}, 0.1875};
    const RenderedImage lo = SceneRenderer(s, reg).render_night(set);
    reg.product_mut("DG4090").r_prime *= 2;
    const SceneRenderer hi_r(s, reg);
    const RenderedImage hi = hi_r.render_night(set);
    for (std::size_t i : hi_r.patch_pixels(p)) CHECK(hi.pixels[i].luminance() >= lo.pixels[i].luminance());
  }

  TEST_CASE("white assumption") {
    const SceneConfig s = reference_scene();
    const SceneRenderer r(s);
    const PatchParams p{0.5, 0.3, 0.25, 0.2, "NittoL"};
    const RenderedImage img = r.render_night({{p}, 0.1875}, {true, {}});
    for (std::size_t i : r.patch_pixels(p)) {
      CHECK(img.pixels[i].r * img.exposure == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(img.pixels[i].b * img.exposure == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("tone map") {
    CHECK(tone_map_value(0.0, 2.0) == 0);
    CHECK(tone_map_value(0.5, 2.0) == 255);
    CHECK(tone_map_value(0.18 / 2.0, 2.0) == 117);
    int prev = 0;
    for (double x = 0; x < 1.2; x += 0.001) {
      const int v = tone_map_value(x, 1.0);
      CHECK(v >= prev);
      prev = v;
    }
  }

  TEST_CASE("EoT") {
    const SceneConfig s = reference_scene();
    const SceneConfig same = apply_eot(s, 42, EotConfig::identity());
    CHECK(same.d_lon == s.d_lon);
    CHECK(same.camera_yaw == s.camera_yaw);
    CHECK(same.headlight.luminous_flux == s.headlight.luminous_flux);
    CHECK(same.night_ambient.illuminance == s.night_ambient.illuminance);
    const SceneConfig a = apply_eot(s, 7), b = apply_eot(s, 7);
    CHECK(a.d_lon == b.d_lon);
    CHECK(a.camera_pitch == b.camera_pitch);
    double sum = 0;
    for (std::uint64_t k = 0; k < 1000; ++k) {
      const SceneConfig e = apply_eot(s, derive_seed(1, {k}));
      const double m = e.headlight.luminous_flux / s.headlight.luminous_flux;
      CHECK(m >= 0.7);
      CHECK(m <= 1.3);
      CHECK(std::abs(e.d_lon - s.d_lon) <= 2.0);
      sum += m;
    }
    CHECK(std::abs(sum / 1000 - 1.0) < 0.02);
  }

  TEST_CASE("renders are deterministic and finite") {
    const SceneConfig s = apply_eot(reference_scene(), 11);
    const PatchSet set{{{0.3, 0.6, 0.2, 0.3, "HIP3930"}}, 0.1875};
    const RenderedImage a = render_night(s, set), b = render_night(s, set);
    CHECK(a.pixels == b.pixels);
    for (const auto& p : a.pixels) {
      CHECK(std::isfinite(p.r));
      CHECK(p.min_component() >= 0.0);
    }
  }

  TEST_CASE("image files") {
    const auto dir = arp::testing::temp_dir("images");
    const Raster8 r = tone_map(render_night(reference_scene(), {}));
    write_ppm(dir + "/a.ppm", r);
    const Raster8 back = read_ppm(dir + "/a.ppm");
    CHECK(back.width == r.width);
    CHECK(back.rgb == r.rgb);
    CHECK_NOTHROW(write_png(dir + "/a.png", r));
    const Raster8 three = hstack({r, r, r});
    CHECK(three.width == 3 * r.width + 8);
    CHECK_THROWS_AS(read_ppm(dir + "/missing.ppm"), IoError);
  }

  TEST_CASE("patch set validation") {
    PatchSet over{{{0.5, 0.5, 0.5, 0.5, "DG4090"}}, 0.1875};
    CHECK_FALSE(over.conformant());
    CHECK_THROWS_AS(over.validate(), InvalidArgument);
    PatchSet overlap{{{0.3, 0.3, 0.2, 0.2, "DG4090"}, {0.35, 0.35, 0.2, 0.2, "DG4090"}}, 0.25};
    CHECK_FALSE(overlap.conformant());
    PatchSet outside{{{0.95, 0.5, 0.2, 0.2, "DG4090"}}, 0.25};
    CHECK_FALSE(outside.conformant());
  }
}
