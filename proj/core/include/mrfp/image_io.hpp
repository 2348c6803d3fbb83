#pragma once

#include <string>

#include "mrfp/tensor.hpp"

namespace mrfp {

// 8-bit binary PPM/PGM. Images are (1,3,H,W) in [0,1]; masks are (1,H,W)
// label maps whose values fit a byte (the 255 ignore value included).
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

void write_pgm(const std::string& path, const LabelMap& mask);
LabelMap read_pgm(const std::string& path);

}  // namespace mrfp
