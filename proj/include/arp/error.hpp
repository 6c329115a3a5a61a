#pragma once

#include <stdexcept>
#include <string>

namespace arp {

/// Base of every error raised by the library. `kind()` is the stable name
/// used in CLI messages and tests.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define ARP_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

ARP_DEFINE_ERROR(InvalidArgument)
ARP_DEFINE_ERROR(ZeroIlluminant)
ARP_DEFINE_ERROR(GridMismatch)
ARP_DEFINE_ERROR(MissingSpectralData)
ARP_DEFINE_ERROR(InvalidDistance)
ARP_DEFINE_ERROR(GrazingAngle)
ARP_DEFINE_ERROR(DegenerateObservation)
ARP_DEFINE_ERROR(OutOfFrustum)
ARP_DEFINE_ERROR(TrainingDiverged)
ARP_DEFINE_ERROR(InvalidCount)
ARP_DEFINE_ERROR(MissingFilter)
ARP_DEFINE_ERROR(ConfigError)
ARP_DEFINE_ERROR(IoError)
ARP_DEFINE_ERROR(ProtocolError)

#undef ARP_DEFINE_ERROR

}  // namespace arp
