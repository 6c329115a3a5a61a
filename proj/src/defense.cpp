#include "arp/defense.hpp"

#include <algorithm>
#include <unordered_set>

#include "arp/error.hpp"

namespace arp {

RenderedImage render_night_defended(const SceneConfig& scene, const PatchSet& patches, const PolarizerConfig& config,
                                    const MaterialRegistry& registry) {
  return SceneRenderer(scene, registry).render_night(patches, {false, config});
}

DefenseResult evaluate_defense(const Scorer& model, const SceneConfig& scene, const PatchSet& patches,
                               const PolarizerConfig& config, int trials, std::uint64_t seed, const EotConfig& eot,
                               const MaterialRegistry& registry) {
  if (trials < 1) throw InvalidArgument("evaluate_defense needs at least one trial");
  config.validate();
  const SignClass truth = class_for_sign(scene.sign);
  const PatchSet benign{{}, patches.mpr};
  int undefended = 0, defended = 0, benign_ok = 0;
  for (int k = 0; k < trials; ++k) {
    const SceneRenderer r(apply_eot(scene, derive_seed(seed, {static_cast<std::uint64_t>(k)}), eot), registry);
    if (detect(model, r.render_night(patches), truth).attack_success) ++undefended;
    if (detect(model, r.render_night(patches, {false, config}), truth).attack_success) ++defended;
    if (!detect(model, r.render_night(benign, {false, config}), truth).attack_success) ++benign_ok;
  }
  const double n = trials;
  return {undefended / n, defended / n, benign_ok / n};
}

double patch_contrast(const SceneRenderer& renderer, const RenderedImage& image, const PatchParams& patch) {
  const auto covered = renderer.patch_pixels(patch);
  const auto color = SignLayout::of(renderer.scene().sign).dominant_color(patch.rect());
  if (covered.empty() || !color) throw InvalidArgument("patch covers no sign pixels");
  const std::unordered_set<std::size_t> in_patch(covered.begin(), covered.end());
  double lp = 0.0, lb = 0.0;
  std::size_t nb = 0;
  for (std::size_t i : covered) lp += image.pixels[i].luminance();
  for (std::size_t i : renderer.region_pixels(*color)) {
    if (in_patch.count(i)) continue;
    lb += image.pixels[i].luminance();
    ++nb;
  }
  if (nb == 0 || lb <= 0.0) throw InvalidArgument("no uncovered pixels in the patch's region");
  return (lp / static_cast<double>(covered.size())) / (lb / static_cast<double>(nb));
}

}  // namespace arp
