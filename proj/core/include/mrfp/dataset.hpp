#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mrfp/tensor.hpp"

namespace mrfp {

inline constexpr int kNumClasses = 5;  // background, disk, rectangle, triangle, stripes

enum class Corruption { kNone, kFogBlend, kRainStreaks };

std::string to_string(Corruption c);
Corruption parse_corruption(const std::string& s);

// One synthetic domain. All domains share the same scene/label generative
// process; texture, palette, color statistics and corruption are what shift.
struct DomainSpec {
  std::string name = "domain";
  int texture_family = 0;       // 0 sinusoid mix, 1 value noise, 2 oriented stripes
  double texture_freq_lo = 2.0; // cycles per image
  double texture_freq_hi = 6.0;
  double texture_amp = 0.25;
  std::array<double, 3> color_mean_shift{0.0, 0.0, 0.0};
  std::array<double, 3> color_std_scale{1.0, 1.0, 1.0};
  double palette_shift = 0.0;   // hue rotation of the object palette, [0,1)
  Corruption corruption = Corruption::kNone;
  double corruption_strength = 0.0;  // fog blend or rain intensity, [0,1]
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct Sample {
  Tensor image;   // (1,3,H,W) in [0,1]
  LabelMap mask;  // (1,H,W) labels in {0..K-1} (the ignore value is legal)
};

// Deterministic per (spec.seed, index_offset + i). Each sample is 2-5
// labeled geometric objects over a textured background, corrupted last.
std::vector<Sample> generate_dataset(const DomainSpec& spec, int count, int height,
                                     int width, std::int64_t index_offset = 0);

// One directory per domain: images/ and masks/ as lossless rasters plus a
// manifest carrying (spec, count, size), which alone regenerates the set.
void save_dataset(const std::string& dir, const DomainSpec& spec, int height, int width,
                  const std::vector<Sample>& samples);
std::vector<Sample> load_dataset(const std::string& dir);
DomainSpec read_manifest(const std::string& dir, int* count, int* height, int* width);

}  // namespace mrfp
