#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arp/material.hpp"
#include "arp/sign_layout.hpp"

namespace arp {

/// One rectangular patch. (x, y) is the center in face coordinates; w and h
/// are fractions of the face width and height.
struct PatchParams {
  double x = 0.5;
  double y = 0.5;
  double w = 0.1;
  double h = 0.1;
  std::string product = "DG4090";

  FaceRect rect() const { return {x - 0.5 * w, y - 0.5 * h, x + 0.5 * w, y + 0.5 * h}; }
  double area() const { return w * h; }
  friend bool operator==(const PatchParams&, const PatchParams&) = default;
};

struct PatchSet {
  std::vector<PatchParams> patches;
  double mpr = 1.0;

  double total_area() const;
  bool empty() const { return patches.empty(); }
  /// Throws InvalidArgument when a patch leaves the face, patches overlap or
  /// the total area exceeds the MPR budget (1e-9 slack).
  void validate() const;
  bool conformant() const;
};

bool rects_overlap(const FaceRect& a, const FaceRect& b);

/// A patch bound to the color region it must match.
struct ResolvedPatch {
  FaceRect rect;
  SheetColor color = SheetColor::White;
  MaterialSpec material;
};

/// Patches whose rectangle covers no sign region are dropped.
std::vector<ResolvedPatch> resolve_patches(const PatchSet& set, const SignLayout& layout,
                                           const MaterialRegistry& registry);

}  // namespace arp
