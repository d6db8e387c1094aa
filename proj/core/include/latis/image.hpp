// Grayscale image container plus the resampling and quality metrics used by
// both the data pipeline and the model's upsampling path. The same
// bicubic_resize feeds training-pair synthesis, the network's long skip, and
// the evaluation baseline, so those paths agree bit for bit.
#pragma once

#include <cstdint>
#include <vector>

namespace latis {

// Row-major single-channel image with intensities in [0,1].
struct ImageF {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  ImageF() = default;
  ImageF(int h, int w) : height(h), width(w), pixels(int64_t(h) * w, 0.f) {}
  float& at(int y, int x) { return pixels[int64_t(y) * width + x]; }
  float at(int y, int x) const { return pixels[int64_t(y) * width + x]; }
  int64_t numel() const { return int64_t(height) * width; }
};

// Separable Catmull-Rom (a = -0.5) resampling with half-pixel centers
//   src = (dst + 0.5) * (in/out) - 0.5,
// edge-clamped taps, per-output weight normalization, and kernel support
// widened by the scale factor when shrinking. Output is clamped to [0,1].
// Accumulation runs in double, horizontally then vertically.
ImageF bicubic_resize(const ImageF& src, int out_h, int out_w);

// Peak signal-to-noise ratio in dB against a peak of 1.0. Identical images
// return +infinity.
double psnr(const ImageF& a, const ImageF& b);

// Mean structural similarity: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1, symmetric-reflection borders.
double ssim(const ImageF& a, const ImageF& b);

}  // namespace latis
