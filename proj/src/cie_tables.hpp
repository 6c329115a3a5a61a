#pragma once

#include <array>

namespace arp::tables {

extern const std::array<std::array<double, 3>, 81> kCie1931;
extern const std::array<double, 81> kD65;
extern const std::array<double, 81> kWhiteLed;

}  // namespace arp::tables
