#pragma once

#include <string>
#include <vector>

#include "arp/tsr.hpp"

namespace arp {

/// Scorer backed by a child process. Each request is one JSON line
/// {"image": "<ppm path>", "classes": [...]} on the child's stdin; the child
/// answers with one line {"confidence": [...]} in the same class order.
class ExternalScorer : public Scorer {
 public:
  /// argv[0] is resolved through PATH. Images are written as PPM files under
  /// work_dir.
  ExternalScorer(std::vector<std::string> argv, std::vector<SignClass> classes, std::string work_dir);
  ~ExternalScorer() override;
  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  const std::vector<SignClass>& classes() const override { return classes_; }
  /// Throws ProtocolError on malformed or mis-sized responses, IoError if the
  /// child has gone away.
  std::vector<double> scores(const RenderedImage& image) const override;

 private:
  std::vector<SignClass> classes_;
  std::string work_dir_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::string pending_;
  mutable unsigned long long counter_ = 0;

  std::string read_line() const;
};

}  // namespace arp
