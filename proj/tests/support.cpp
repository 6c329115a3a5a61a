#include "support.hpp"

#include <filesystem>

#include "arp/renderer.hpp"
#include "arp/sign_layout.hpp"

namespace arp::testing {

const SurrogateModel& trained_model() {
  static const SurrogateModel m = train_surrogate({reference_scene()}, all_classes(), 7);
  return m;
}

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("arp_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

PatchParams patch_on(const SignSpec& sign, SheetColor color, double w, double h, const std::string& product) {
  const auto& layout = SignLayout::of(sign);
  double best = 0;
  PatchParams out{0.5, 0.5, w, h, product};
  for (double y = h / 2; y <= 1 - h / 2; y += 0.01)
    for (double x = w / 2; x <= 1 - w / 2; x += 0.01) {
      const FaceRect r{x - w / 2, y - h / 2, x + w / 2, y + h / 2};
      const double c = layout.coverage(r, color);
      if (c > best) best = c, out.x = x, out.y = y;
    }
  return out;
}

}  // namespace arp::testing
