#include <doctest.h>

#include <cmath>
#include <numbers>

#include "arp/error.hpp"
#include "arp/renderer.hpp"
#include "arp/scene.hpp"

using namespace arp;

TEST_SUITE("scene") {
  TEST_CASE("on-axis sign center maps to the image center") {
    SceneConfig s = colocated_scene();
    s.h_s = s.h_l;
    const CameraFrame cam(s);
    const PixelPoint c = cam.project(s.sign_center());
    CHECK(c.x == doctest::Approx(s.camera.pixels_x / 2.0));
    CHECK(c.y == doctest::Approx(s.camera.pixels_y / 2.0));
    const auto uv = cam.face_at(c.x, c.y);
    REQUIRE(uv);
    CHECK(uv->first == doctest::Approx(0.5));
    CHECK(uv->second == doctest::Approx(0.5));
  }

  TEST_CASE("pinhole size") {
    const SceneConfig s = reference_scene();
    const SignProjection p = project_sign(s);
    const double f_px = s.camera.focal_length / s.camera.pixel_pitch();
    CHECK(p.bbox_width == doctest::Approx(s.sign.width * f_px / s.d_lon).epsilon(1e-9));
    CHECK(p.bbox_height == doctest::Approx(s.sign.height * f_px / s.d_lon).epsilon(1e-9));

    SceneConfig far = s;
    far.d_lon *= 2;
    const SignProjection q = project_sign(far);
    CHECK(std::abs(q.bbox_width - p.bbox_width / 2) < 1.0);
    CHECK(std::abs(q.bbox_height - p.bbox_height / 2) < 1.0);
    for (double d = 10; d < 60; d += 5) {
      SceneConfig a = s, b = s;
      a.d_lon = d;
      b.d_lon = d + 5;
      CHECK(project_sign(b).bbox_width < project_sign(a).bbox_width);
    }
  }

  TEST_CASE("sign behind the camera") {
    SceneConfig s = reference_scene();
    s.camera_yaw = std::numbers::pi * 0.9;
    CHECK_THROWS_AS(project_sign(s), OutOfFrustum);
    SceneConfig t = reference_scene();
    t.camera_offset = {20.0, 0.0, 0.0};
    CHECK_THROWS_AS(t.validate(), OutOfFrustum);
  }

  TEST_CASE("reflection geometry closed forms") {
    SceneConfig s = colocated_scene();
    s.h_s = s.h_l;
    CHECK(reflection_geometry_at(s, 0.5, 0.5).observation == doctest::Approx(0.0));

    SceneConfig m = colocated_scene();
    m.d_lat = 1.85;
    m.h_s = m.h_l + 0.75;
    const auto g = reflection_geometry_at(m, 0.5, 0.5);
    CHECK(std::cos(g.entrance) == doctest::Approx(15.0 / std::sqrt(15.0 * 15 + 1.85 * 1.85 + 0.75 * 0.75)));
    CHECK(g.entrance == doctest::Approx(g.viewing));

    SceneConfig up = colocated_scene();
    up.h_s = up.h_l;
    up.camera_offset = {0.0, 0.0, 0.5};
    CHECK(reflection_geometry_at(up, 0.5, 0.5).observation == doctest::Approx(std::atan(0.5 / 15.0)).epsilon(1e-6));
  }

  TEST_CASE("pixel round trip and continuity") {
    const SceneConfig s = reference_scene();
    const CameraFrame cam(s);
    const SignProjection p = project_sign(s);
    for (int y = p.bbox_y0; y < p.bbox_y1; y += 7)
      for (int x = p.bbox_x0; x < p.bbox_x1; x += 7) {
        const auto uv = cam.face_at(x + 0.5, y + 0.5);
        REQUIRE(uv);
        const PixelPoint back = cam.project(s.face_point(uv->first, uv->second));
        CHECK(std::abs(back.x - (x + 0.5)) < 0.5);
        CHECK(std::abs(back.y - (y + 0.5)) < 0.5);
        const auto uv2 = cam.face_at(x + 1.5, y + 0.5);
        const auto a = reflection_geometry_at(s, uv->first, uv->second);
        const auto b = reflection_geometry_at(s, uv2->first, uv2->second);
        CHECK(std::abs(a.entrance - b.entrance) < 1e-3);
        CHECK(std::abs(a.viewing - b.viewing) < 1e-3);
        CHECK(std::abs(a.observation - b.observation) < 1e-3);
      }
  }

  TEST_CASE("observation angle bound") {
    const SceneConfig s = reference_scene();
    for (double u = 0.05; u < 1; u += 0.1)
      for (double v = 0.05; v < 1; v += 0.1) {
        const auto g = reflection_geometry_at(s, u, v);
        CHECK(g.observation >= std::abs(g.entrance - g.viewing) - 1e-12);
      }
  }

  TEST_CASE("camera validation") {
    CameraModel c;
    CHECK_NOTHROW(c.validate());
    c.pixels_y = 800;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.focal_length = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }

  TEST_CASE("headlight cone") {
    const SceneConfig s = reference_scene();
    CHECK(headlight_irradiance_at(s, s.sign_center()) > 0.0);
    CHECK(headlight_irradiance_at(s, {15.0, 30.0, 0.75}) == 0.0);
  }

  TEST_CASE("sign sizes") {
    CHECK(SignSpec::stop().width == doctest::Approx(0.762));
    CHECK(SignSpec::speed_limit(65).width == doctest::Approx(0.61));
    CHECK(SignSpec::speed_limit(65).height == doctest::Approx(0.762));
    CHECK(SignSpec::speed_limit(65).label() == "SL65");
  }
}
