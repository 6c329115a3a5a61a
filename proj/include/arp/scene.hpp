#pragma once

#include <array>
#include <optional>
#include <string>

#include "arp/photometry.hpp"
#include "arp/sign_layout.hpp"

namespace arp {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const;
  Vec3 normalized() const;
};

struct CameraModel {
  double sensor_width = 7.2;  // mm
  double sensor_height = 5.4;  // mm
  double focal_length = 12.0;  // mm
  int pixels_x = 1440;
  int pixels_y = 1080;

  double pixel_pitch() const { return sensor_width / pixels_x; }  // mm
  double focal_pixels() const { return focal_length / pixel_pitch(); }
  void validate() const;
  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// Encounter geometry. World frame: x forward along the road, y left, z up.
/// The headlight sits at (0, 0, h_l); the sign center at (d_lon, -d_lat, h_s)
/// facing the car.
struct SceneConfig {
  double d_lon = 15.0;
  double d_lat = 0.0;
  double h_s = 1.5;
  double h_l = 0.75;
  Vec3 camera_offset{0.0, 0.6, 0.5};
  double camera_yaw = 0.0;  // rad, positive turns left
  double camera_pitch = 0.0;  // rad, positive looks up
  AmbientLight day_ambient{600.0};
  AmbientLight night_ambient{1.0};
  HeadlightSpec headlight{};
  CameraModel camera{};
  SignSpec sign = SignSpec::stop();
  std::string illuminant = "LED";
  double exposure = 1.0;
  double background_albedo = 0.2;

  Vec3 headlight_position() const { return {0.0, 0.0, h_l}; }
  Vec3 camera_position() const { return headlight_position() + camera_offset; }
  Vec3 sign_center() const { return {d_lon, -d_lat, h_s}; }
  /// World point of face coordinate (u, v); u to the driver's right, v down.
  Vec3 face_point(double u, double v) const;

  void validate() const;
};

/// Static reference scene: camera co-located with the headlight, sign on axis.
SceneConfig colocated_scene();

struct ReflectionGeometry {
  double entrance = 0.0;  // beta
  double viewing = 0.0;  // upsilon
  double observation = 0.0;
  void validate() const;
};

struct PixelPoint {
  double x = 0, y = 0;
};

/// Pinhole projection of the sign.
struct SignProjection {
  std::array<PixelPoint, 4> corners{};  // (0,0), (1,0), (1,1), (0,1) in face coords
  int bbox_x0 = 0, bbox_y0 = 0, bbox_x1 = 0, bbox_y1 = 0;  // inclusive-exclusive pixel range
  double bbox_width = 0, bbox_height = 0;  // continuous extent in pixels
};

class CameraFrame {
 public:
  explicit CameraFrame(const SceneConfig& scene);
  /// Throws OutOfFrustum if p is behind the camera.
  PixelPoint project(const Vec3& p) const;
  /// Face coordinates hit by the ray through pixel position (px, py), or
  /// nullopt if the ray misses the sign plane.
  std::optional<std::pair<double, double>> face_at(double px, double py) const;
  const Vec3& position() const { return origin_; }

 private:
  Vec3 origin_, fwd_, right_, up_;
  double f_px_, cx_, cy_;
  Vec3 sign_center_;
  double sign_w_, sign_h_;
};

SignProjection project_sign(const SceneConfig& scene);

ReflectionGeometry reflection_geometry_at(const SceneConfig& scene, double u, double v);
/// Same quantities for an arbitrary world point on the sign plane.
ReflectionGeometry reflection_geometry_world(const SceneConfig& scene, const Vec3& p);

/// Beam-normal headlight irradiance at a world point: the flux spread over
/// the beam footprint at that range, zero outside the cone aimed at the sign.
double headlight_irradiance_at(const SceneConfig& scene, const Vec3& p);

}  // namespace arp
