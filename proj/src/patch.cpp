#include "arp/patch.hpp"

#include "arp/error.hpp"

namespace arp {

double PatchSet::total_area() const {
  double a = 0.0;
  for (const auto& p : patches) a += p.area();
  return a;
}

bool rects_overlap(const FaceRect& a, const FaceRect& b) {
  return a.u0 < b.u1 && b.u0 < a.u1 && a.v0 < b.v1 && b.v0 < a.v1;
}

void PatchSet::validate() const {
  constexpr double eps = 1e-9;
  if (!(mpr > 0.0 && mpr <= 1.0)) throw InvalidArgument("mpr must lie in (0, 1]");
  for (const auto& p : patches) {
    if (!(p.w > 0.0 && p.w <= 1.0 && p.h > 0.0 && p.h <= 1.0)) throw InvalidArgument("patch size must lie in (0, 1]");
    const FaceRect r = p.rect();
    if (r.u0 < -eps || r.v0 < -eps || r.u1 > 1.0 + eps || r.v1 > 1.0 + eps)
      throw InvalidArgument("patch leaves the sign face");
  }
  for (std::size_t i = 0; i < patches.size(); ++i)
    for (std::size_t j = i + 1; j < patches.size(); ++j)
      if (rects_overlap(patches[i].rect(), patches[j].rect())) throw InvalidArgument("patches overlap");
  if (total_area() > mpr + eps) throw InvalidArgument("patch area exceeds the MPR budget");
}

bool PatchSet::conformant() const {
  try {
    validate();
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::vector<ResolvedPatch> resolve_patches(const PatchSet& set, const SignLayout& layout,
                                           const MaterialRegistry& registry) {
  std::vector<ResolvedPatch> out;
  for (const auto& p : set.patches) {
    const FaceRect r = p.rect();
    const auto color = layout.dominant_color(r);
    if (!color) continue;
    out.push_back({r, *color, registry.variant(p.product, *color)});
  }
  return out;
}

}  // namespace arp
