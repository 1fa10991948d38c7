#pragma once

// Plaintext reference path: synthetic 1-D camera, centroid feature,
// proportional law, stage plant and gain quantization.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "evfc/modarith.hpp"

namespace evfc {

/// One 1-D frame. pixels[idx] is the brightness at camera coordinate
/// i = idx - n/2, i in {-n/2, ..., n/2 - 1}.
struct Image {
  std::vector<int> pixels;

  std::size_t size() const noexcept { return pixels.size(); }
  std::int64_t coordinate(std::size_t idx) const noexcept {
    return static_cast<std::int64_t>(idx) - static_cast<std::int64_t>(pixels.size() / 2);
  }
  int at(std::int64_t i) const { return pixels.at(static_cast<std::size_t>(i + static_cast<std::int64_t>(size() / 2))); }

  void validate() const {
    if (pixels.empty() || pixels.size() % 2 != 0) throw OutOfRange("image width must be even and positive");
    for (int v : pixels) {
      if (v < 0 || v > 255) throw OutOfRange("pixel brightness outside [0, 255]");
    }
  }
};

/// floor(x + 1/2)
inline std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

/// Stage of `stage_len` pixels with brightness fg centered at round(position),
/// background bg elsewhere. Even lengths extend one pixel further right.
inline Image synthesize_image(double position, std::size_t n, std::size_t stage_len, int fg, int bg) {
  if (n == 0 || n % 2 != 0) throw OutOfRange("image width must be even and positive");
  if (stage_len == 0) throw OutOfRange("stage length must be positive");
  if (fg < 0 || fg > 255 || bg < 0 || bg > 255) throw OutOfRange("brightness outside [0, 255]");
  if (!std::isfinite(position)) throw StageOutOfFrame("stage position is not finite");
  const auto half = static_cast<std::int64_t>(n / 2);
  const std::int64_t center = round_half_up(position);
  const std::int64_t first = center - static_cast<std::int64_t>((stage_len - 1) / 2);
  const std::int64_t last = first + static_cast<std::int64_t>(stage_len) - 1;
  if (first < -half || last > half - 1) {
    throw StageOutOfFrame("stage spans [" + std::to_string(first) + ", " + std::to_string(last) +
                          "], frame is [" + std::to_string(-half) + ", " + std::to_string(half - 1) + "]");
  }
  Image img{std::vector<int>(n, bg)};
  for (std::int64_t i = first; i <= last; ++i) img.pixels[static_cast<std::size_t>(i + half)] = fg;
  return img;
}

struct Centroid {
  std::int64_t weighted = 0;  // sum i * I_i
  std::int64_t total = 0;     // sum I_i
  double g = 0.0;
};

inline Centroid centroid(const Image& img) {
  Centroid c;
  for (std::size_t idx = 0; idx < img.size(); ++idx) {
    c.weighted += img.coordinate(idx) * img.pixels[idx];
    c.total += img.pixels[idx];
  }
  if (c.total == 0) throw AllDarkImage("image has no brightness; centroid undefined");
  c.g = static_cast<double>(c.weighted) / static_cast<double>(c.total);
  return c;
}

inline double control_law(double g, double gain) { return gain * g; }

/// Stage model y' = a*y - b*u: the drive opposes the measured offset.
struct PlantState {
  double y = 0.0;
  double a = 0.9804;
  double b = 0.0196;
};

inline PlantState plant_step(PlantState s, double u) {
  s.y = s.a * s.y - s.b * u;
  return s;
}

/// center_mod(round_half_up(delta * gain), t).
inline std::int64_t quantize_gain(double gain, double delta, std::uint64_t t) {
  const double scaled = delta * gain;
  if (!std::isfinite(scaled) || std::abs(scaled) >= static_cast<double>(t) / 2) {
    throw GainOverflow("|delta * K| = " + std::to_string(std::abs(scaled)) + " does not fit below t/2");
  }
  return center_mod(round_half_up(scaled), static_cast<std::int64_t>(t));
}

/// Worst case |delta * K * I_w| over n-pixel frames: delta*|K|*(n/2)*255*n.
inline double worst_case_numerator(double gain, double delta, std::size_t n) {
  const double nn = static_cast<double>(n);
  return delta * std::abs(gain) * (nn / 2) * 255.0 * nn;
}

inline bool overflow_safe(double gain, double delta, std::size_t n, std::uint64_t t) {
  return worst_case_numerator(gain, delta, n) < static_cast<double>(t) / 2;
}

}  // namespace evfc
