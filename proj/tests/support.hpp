#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "arp/patch.hpp"
#include "arp/tsr.hpp"

namespace arp::testing {

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

/// Always returns the same probability vector.
class FixedScorer : public Scorer {
 public:
  explicit FixedScorer(std::vector<double> probs, std::vector<SignClass> classes = all_classes())
      : probs_(std::move(probs)), classes_(std::move(classes)) {}
  const std::vector<SignClass>& classes() const override { return classes_; }
  std::vector<double> scores(const RenderedImage&) const override { return probs_; }

 private:
  std::vector<double> probs_;
  std::vector<SignClass> classes_;
};

/// Surrogate trained with the preset classifier settings, built once per
/// test binary.
const SurrogateModel& trained_model();

std::string temp_dir(const std::string& name);

/// Rectangle of size w x h placed where it covers most of `color`.
PatchParams patch_on(const SignSpec& sign, SheetColor color, double w, double h, const std::string& product);

}  // namespace arp::testing
