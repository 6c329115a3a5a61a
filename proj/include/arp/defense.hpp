#pragma once

#include <cstdint>

#include "arp/optimizer.hpp"
#include "arp/polarization.hpp"

namespace arp {

/// Night render seen through the filter set. Retro terms scale by each
/// surface's polarized transmission; diffuse terms are treated as fully
/// depolarized.
RenderedImage render_night_defended(const SceneConfig& scene, const PatchSet& patches, const PolarizerConfig& config,
                                    const MaterialRegistry& registry = MaterialRegistry::builtin());

struct DefenseResult {
  double asr_undefended = 0.0;
  double asr_defended = 0.0;
  double benign_accuracy_defended = 0.0;
};

/// All three rates over the same `trials` EoT scenes.
DefenseResult evaluate_defense(const Scorer& model, const SceneConfig& scene, const PatchSet& patches,
                               const PolarizerConfig& config, int trials, std::uint64_t seed,
                               const EotConfig& eot = {},
                               const MaterialRegistry& registry = MaterialRegistry::builtin());

/// Mean luminance of patch pixels over the mean luminance of the uncovered
/// pixels of the same color region. Throws InvalidArgument if either set is
/// empty.
double patch_contrast(const SceneRenderer& renderer, const RenderedImage& image, const PatchParams& patch);

}  // namespace arp
