#pragma once

#include <string>

#include "cbx/image.hpp"

namespace cbx {

// 8-bit lossless PNG, grayscale for 1 channel and RGB for 3.
// Pixels are quantized with round(v * 255); read_png maps back by /255, so a
// write/read round trip stays within 1/255 per channel.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

}  // namespace cbx
