#pragma once

#include <string>
#include <vector>

#include "arp/renderer.hpp"

namespace arp {

void write_png(const std::string& path, const Raster8& image);
void write_ppm(const std::string& path, const Raster8& image);
Raster8 read_ppm(const std::string& path);

/// Side-by-side composition with a 4-pixel dark gap; rows are top-aligned.
Raster8 hstack(const std::vector<Raster8>& images);

}  // namespace arp
