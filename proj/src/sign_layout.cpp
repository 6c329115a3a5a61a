#include "arp/sign_layout.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "arp/error.hpp"

namespace arp {

SignSpec SignSpec::stop() { return {SignKind::Stop, 0, 0.762, 0.762, "Face"}; }
SignSpec SignSpec::speed_limit(int value) { return {SignKind::SpeedLimit, value, 0.61, 0.762, "Face"}; }
SignSpec SignSpec::yield() { return {SignKind::Yield, 0, 0.762, 0.66, "Face"}; }

std::string SignSpec::label() const {
  switch (kind) {
    case SignKind::Stop: return "STOP";
    case SignKind::SpeedLimit: return "SL" + std::to_string(speed);
    case SignKind::Yield: return "YIELD";
  }
  return "?";
}

void SignSpec::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) throw InvalidArgument("sign width and height must be > 0");
  if (kind == SignKind::SpeedLimit && (speed <= 0 || speed > 99))
    throw InvalidArgument("speed limit value must lie in 1..99");
}

namespace {

// 5x7 glyphs, rows top to bottom, bit 4 = leftmost column.
const std::map<char, std::array<std::uint8_t, 7>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 7>> g{
      {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
      {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
      {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
      {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
      {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
      {'D', {0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110}},
      {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
      {'I', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
      {'Y', {0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100}},
      {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
      {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
      {'3', {0b11110, 0b00001, 0b00001, 0b01110, 0b00001, 0b00001, 0b11110}},
      {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
      {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
      {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
      {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
      {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
      {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
  };
  return g;
}

struct TextLine {
  std::string text;
  double center_u;
  double top_v;
  double height_v;
};

// True if (u,v) falls on a set glyph cell. `aspect` = sign height / width.
bool on_text(const TextLine& t, double aspect, double u, double v) {
  const double cell_v = t.height_v / 7.0;
  const double cell_u = cell_v * aspect;
  const int cols = static_cast<int>(t.text.size()) * 6 - 1;
  const double left = t.center_u - 0.5 * cols * cell_u;
  const int cx = static_cast<int>(std::floor((u - left) / cell_u));
  const int cy = static_cast<int>(std::floor((v - t.top_v) / cell_v));
  if (cx < 0 || cx >= cols || cy < 0 || cy >= 7) return false;
  const int ch = cx / 6, col = cx % 6;
  if (col == 5) return false;
  const auto it = glyphs().find(t.text[static_cast<std::size_t>(ch)]);
  if (it == glyphs().end()) return false;
  return (it->second[static_cast<std::size_t>(cy)] >> (4 - col)) & 1;
}

// Regular octagon with flats at distance 0.5 from the center.
double octagon_radius(double u, double v) {
  const double x = std::abs(u - 0.5), y = std::abs(v - 0.5);
  return std::max({x, y, (x + y) / std::sqrt(2.0)});
}

// Downward-pointing triangle (0,0)-(1,0)-(0.5,1). Returns the scale about
// the centroid at which (u,v) lies on the boundary: 1 = outer edge.
double triangle_scale(double u, double v) {
  const double du = u - 0.5, dv = v - 1.0 / 3.0;
  const double top = -dv;
  const double left = -du + 0.5 * dv;
  const double right = du + 0.5 * dv;
  return 3.0 * std::max({top, left, right});
}

}  // namespace

SignLayout::SignLayout(const SignSpec& sign) : cells_(static_cast<std::size_t>(kRes) * kRes, kOutside) {
  const double aspect = sign.height / sign.width;
  const auto white = static_cast<std::uint8_t>(SheetColor::White);
  const auto red = static_cast<std::uint8_t>(SheetColor::Red);
  const auto black = static_cast<std::uint8_t>(SheetColor::Black);
  std::vector<TextLine> lines;
  if (sign.kind == SignKind::Stop) {
    lines.push_back({"STOP", 0.5, 0.375, 0.25});
    colors_ = {SheetColor::White, SheetColor::Red};
  } else if (sign.kind == SignKind::SpeedLimit) {
    lines.push_back({"SPEED", 0.5, 0.11, 0.12});
    lines.push_back({"LIMIT", 0.5, 0.27, 0.12});
    lines.push_back({std::to_string(sign.speed), 0.5, 0.47, 0.40});
    colors_ = {SheetColor::White, SheetColor::Black};
  } else {
    colors_ = {SheetColor::White, SheetColor::Red};
  }
  for (int y = 0; y < kRes; ++y) {
    const double v = (y + 0.5) / kRes;
    for (int x = 0; x < kRes; ++x) {
      const double u = (x + 0.5) / kRes;
      std::uint8_t c = kOutside;
      if (sign.kind == SignKind::Stop) {
        const double r = octagon_radius(u, v);
        if (r <= 0.5) c = r > 0.465 ? white : red;
      } else if (sign.kind == SignKind::SpeedLimit) {
        const double e = std::min({u, 1.0 - u, v * aspect, (1.0 - v) * aspect});
        c = (e >= 0.02 && e < 0.05) ? black : white;
      } else {
        const double s = triangle_scale(u, v);
        if (s <= 1.0) c = (s > 0.92 || s <= 0.52) ? white : red;
      }
      if (c != kOutside) {
        for (const auto& t : lines) {
          if (on_text(t, aspect, u, v)) {
            c = sign.kind == SignKind::Stop ? white : black;
            break;
          }
        }
      }
      cells_[static_cast<std::size_t>(y) * kRes + static_cast<std::size_t>(x)] = c;
    }
  }
  const std::size_t n = static_cast<std::size_t>(kRes + 1) * (kRes + 1);
  sat_.assign(3, std::vector<std::uint32_t>(n, 0));
  for (int c = 0; c < 3; ++c) {
    auto& s = sat_[static_cast<std::size_t>(c)];
    for (int y = 0; y < kRes; ++y) {
      std::uint32_t row = 0;
      for (int x = 0; x < kRes; ++x) {
        row += cells_[static_cast<std::size_t>(y) * kRes + static_cast<std::size_t>(x)] == c ? 1u : 0u;
        s[static_cast<std::size_t>(y + 1) * (kRes + 1) + static_cast<std::size_t>(x + 1)] =
            s[static_cast<std::size_t>(y) * (kRes + 1) + static_cast<std::size_t>(x + 1)] + row;
      }
    }
  }
}

const SignLayout& SignLayout::of(const SignSpec& sign) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, double, double>, std::unique_ptr<SignLayout>> cache;
  const auto key = std::make_tuple(static_cast<int>(sign.kind), sign.speed, sign.width, sign.height);
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[key];
  if (!slot) slot.reset(new SignLayout(sign));
  return *slot;
}

std::uint8_t SignLayout::region_at(double u, double v) const {
  if (!(u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0)) return kOutside;
  const int x = static_cast<int>(u * kRes), y = static_cast<int>(v * kRes);
  return cells_[static_cast<std::size_t>(y) * kRes + static_cast<std::size_t>(x)];
}

std::optional<SheetColor> SignLayout::color_at(double u, double v) const {
  const auto r = region_at(u, v);
  if (r == kOutside) return std::nullopt;
  return static_cast<SheetColor>(r);
}

std::uint32_t SignLayout::sat_at(int c, int x, int y) const {
  return sat_[static_cast<std::size_t>(c)][static_cast<std::size_t>(y) * (kRes + 1) + static_cast<std::size_t>(x)];
}

double SignLayout::count_in(const FaceRect& r, int c) const {
  auto to_cell = [](double t) { return std::clamp(static_cast<int>(std::lround(t * kRes)), 0, kRes); };
  const int x0 = to_cell(r.u0), x1 = to_cell(r.u1), y0 = to_cell(r.v0), y1 = to_cell(r.v1);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  const auto a = static_cast<std::int64_t>(sat_at(c, x1, y1)) - sat_at(c, x0, y1) - sat_at(c, x1, y0) + sat_at(c, x0, y0);
  return static_cast<double>(a);
}

std::optional<SheetColor> SignLayout::dominant_color(const FaceRect& r) const {
  std::optional<SheetColor> best;
  double best_n = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double n = count_in(r, c);
    if (n > best_n) {
      best_n = n;
      best = static_cast<SheetColor>(c);
    }
  }
  return best;
}

double SignLayout::coverage(const FaceRect& r, SheetColor color) const {
  const double cells = r.area() * kRes * kRes;
  if (cells <= 0.0) return 0.0;
  return count_in(r, static_cast<int>(color)) / cells;
}

}  // namespace arp
