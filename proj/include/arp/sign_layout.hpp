#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arp/material.hpp"

namespace arp {

enum class SignKind { Stop, SpeedLimit, Yield };

struct SignSpec {
  SignKind kind = SignKind::Stop;
  int speed = 0;  // speed-limit numerals, 0 otherwise
  double width = 0.762;  // m
  double height = 0.762;  // m
  std::string face_product = "Face";

  static SignSpec stop();
  static SignSpec speed_limit(int value);
  static SignSpec yield();

  std::string label() const;
  void validate() const;
  friend bool operator==(const SignSpec&, const SignSpec&) = default;
};

/// Axis-aligned rectangle on the sign face, (u, v) in [0,1]^2, v down.
struct FaceRect {
  double u0 = 0, v0 = 0, u1 = 0, v1 = 0;
  double area() const { return (u1 - u0) * (v1 - v0); }
  bool contains(double u, double v) const { return u >= u0 && u < u1 && v >= v0 && v < v1; }
};

/// Rasterized face layout: each cell holds a sheeting color or "outside".
class SignLayout {
 public:
  static constexpr int kRes = 512;
  static constexpr std::uint8_t kOutside = 255;

  /// Shared, immutable instance per sign kind and legend.
  static const SignLayout& of(const SignSpec& sign);

  std::uint8_t region_at(double u, double v) const;
  std::optional<SheetColor> color_at(double u, double v) const;
  /// Color with the largest area inside `r`; ties go to the lower enum value.
  std::optional<SheetColor> dominant_color(const FaceRect& r) const;
  /// Fraction of `r` covered by `color`.
  double coverage(const FaceRect& r, SheetColor color) const;
  /// Colors that occur on the face.
  const std::vector<SheetColor>& colors() const { return colors_; }

 private:
  explicit SignLayout(const SignSpec& sign);
  std::vector<std::uint8_t> cells_;
  std::vector<SheetColor> colors_;
  // Summed-area tables per color for O(1) rectangle queries.
  std::vector<std::vector<std::uint32_t>> sat_;
  std::uint32_t sat_at(int c, int x, int y) const;
  double count_in(const FaceRect& r, int c) const;
};

}  // namespace arp
