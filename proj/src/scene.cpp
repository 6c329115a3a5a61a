#include "arp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arp/error.hpp"

namespace arp {

double Vec3::norm() const { return std::sqrt(dot(*this)); }

Vec3 Vec3::normalized() const {
  const double n = norm();
  return n > 0.0 ? *this * (1.0 / n) : *this;
}

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double safe_acos(double c) { return std::acos(std::clamp(c, -1.0, 1.0)); }

}  // namespace

void CameraModel::validate() const {
  if (!(sensor_width > 0 && sensor_height > 0 && focal_length > 0 && pixels_x > 0 && pixels_y > 0))
    throw InvalidArgument("camera parameters must be positive");
  const double sensor_aspect = sensor_width / sensor_height;
  const double pixel_aspect = static_cast<double>(pixels_x) / pixels_y;
  if (std::abs(sensor_aspect / pixel_aspect - 1.0) > 0.01)
    throw InvalidArgument("sensor aspect ratio does not match resolution");
}

Vec3 SceneConfig::face_point(double u, double v) const {
  return {d_lon, -d_lat - (u - 0.5) * sign.width, h_s - (v - 0.5) * sign.height};
}

void SceneConfig::validate() const {
  if (!(d_lon > 0.0)) throw InvalidDistance("d_lon must be > 0");
  if (!(h_s > 0.0) || !(h_l > 0.0)) throw InvalidArgument("heights must be > 0");
  if (!std::isfinite(d_lat)) throw InvalidArgument("d_lat must be finite");
  if (!(exposure > 0.0)) throw InvalidArgument("exposure must be > 0");
  if (!(background_albedo >= 0.0 && background_albedo <= 1.0))
    throw InvalidArgument("background albedo must lie in [0, 1]");
  if (camera_position().x >= d_lon) throw OutOfFrustum("camera is not in front of the sign");
  day_ambient.validate();
  night_ambient.validate();
  headlight.validate();
  camera.validate();
  sign.validate();
}

SceneConfig colocated_scene() {
  SceneConfig s;
  s.camera_offset = {0.0, 0.0, 0.0};
  return s;
}

void ReflectionGeometry::validate() const {
  const double lim = std::numbers::pi / 2;
  for (double a : {entrance, viewing, observation})
    if (!(a >= 0.0 && a < lim)) throw InvalidArgument("reflection angles must lie in [0, pi/2)");
}

CameraFrame::CameraFrame(const SceneConfig& scene)
    : origin_(scene.camera_position()),
      f_px_(scene.camera.focal_pixels()),
      cx_(scene.camera.pixels_x * 0.5),
      cy_(scene.camera.pixels_y * 0.5),
      sign_center_(scene.sign_center()),
      sign_w_(scene.sign.width),
      sign_h_(scene.sign.height) {
  const double cy = std::cos(scene.camera_yaw), sy = std::sin(scene.camera_yaw);
  const double cp = std::cos(scene.camera_pitch), sp = std::sin(scene.camera_pitch);
  fwd_ = {cp * cy, cp * sy, sp};
  right_ = {sy, -cy, 0.0};
  up_ = cross(right_, fwd_);
}

PixelPoint CameraFrame::project(const Vec3& p) const {
  const Vec3 d = p - origin_;
  const double zc = d.dot(fwd_);
  if (!(zc > 1e-9)) throw OutOfFrustum("point lies behind the camera");
  return {cx_ + f_px_ * d.dot(right_) / zc, cy_ - f_px_ * d.dot(up_) / zc};
}

std::optional<std::pair<double, double>> CameraFrame::face_at(double px, double py) const {
  const Vec3 dir = fwd_ + right_ * ((px - cx_) / f_px_) - up_ * ((py - cy_) / f_px_);
  if (!(dir.x > 1e-12)) return std::nullopt;
  const double t = (sign_center_.x - origin_.x) / dir.x;
  if (!(t > 0.0)) return std::nullopt;
  const Vec3 p = origin_ + dir * t;
  const double u = 0.5 - (p.y - sign_center_.y) / sign_w_;
  const double v = 0.5 - (p.z - sign_center_.z) / sign_h_;
  return std::make_pair(u, v);
}

SignProjection project_sign(const SceneConfig& scene) {
  scene.validate();
  const CameraFrame cam(scene);
  SignProjection out;
  const double uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (int i = 0; i < 4; ++i) {
    const PixelPoint p = cam.project(scene.face_point(uv[i][0], uv[i][1]));
    out.corners[static_cast<std::size_t>(i)] = p;
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const PixelPoint c = cam.project(scene.sign_center());
  if (c.x < 0 || c.y < 0 || c.x >= scene.camera.pixels_x || c.y >= scene.camera.pixels_y)
    throw OutOfFrustum("sign center projects outside the image");
  out.bbox_width = x1 - x0;
  out.bbox_height = y1 - y0;
  out.bbox_x0 = std::max(0, static_cast<int>(std::floor(x0)));
  out.bbox_y0 = std::max(0, static_cast<int>(std::floor(y0)));
  out.bbox_x1 = std::min(scene.camera.pixels_x, static_cast<int>(std::ceil(x1)));
  out.bbox_y1 = std::min(scene.camera.pixels_y, static_cast<int>(std::ceil(y1)));
  return out;
}

ReflectionGeometry reflection_geometry_world(const SceneConfig& scene, const Vec3& p) {
  const Vec3 n{-1.0, 0.0, 0.0};
  const Vec3 l = (scene.headlight_position() - p).normalized();
  const Vec3 v = (scene.camera_position() - p).normalized();
  return {safe_acos(l.dot(n)), safe_acos(v.dot(n)), safe_acos(l.dot(v))};
}

ReflectionGeometry reflection_geometry_at(const SceneConfig& scene, double u, double v) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) throw InvalidArgument("face coordinates must lie in [0,1]");
  return reflection_geometry_world(scene, scene.face_point(u, v));
}

double headlight_irradiance_at(const SceneConfig& scene, const Vec3& p) {
  const Vec3 h = scene.headlight_position();
  const Vec3 aim = (scene.sign_center() - h).normalized();
  const Vec3 d = p - h;
  const double dist = d.norm();
  if (safe_acos(d.normalized().dot(aim)) > scene.headlight.spread_half_angle) return 0.0;
  return headlight_irradiance(scene.headlight, dist);
}

}  // namespace arp
