// Image file I/O (binary PGM and grayscale PNG), low/high-resolution pair
// synthesis, and deterministic batch sampling driven by a counter RNG, so a
// (seed, step) pair always yields the same batch with no sampler state.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "latis/image.hpp"
#include "latis/tensor.hpp"

namespace latis {

// Decode a binary PGM (P5, maxval up to 65535, big-endian 16-bit samples)
// or an 8/16-bit grayscale PNG. Values are scaled to [0,1] by the file's
// own maxval. Unknown magic bytes raise FormatError naming them; short
// reads raise IoError.
ImageF load_image(const std::string& path);

// Encode as PGM or PNG by file extension (.pgm/.pnm/.png), quantizing with
// round-to-nearest at the requested depth (8 or 16 bits).
void save_image(const std::string& path, const ImageF& img,
                int bit_depth = 8);

// Crop so both dimensions divide by s (dropping the bottom/right remainder)
// and synthesize the low-resolution input by bicubic downscaling.
// Returns (lr, hr_cropped).
std::pair<ImageF, ImageF> make_pair(const ImageF& hr, int s);

struct Batch {
  Tensor<float> lr;  // [batch, 1, crop/s, crop/s]
  Tensor<float> hr;  // [batch, 1, crop, crop]
};

class Dataset {
 public:
  // `source` is either a directory (scanned non-recursively, lexicographic
  // order) or a manifest file of newline-separated image paths. crop is the
  // HR window edge (a multiple of 8 and of scale); 0 trains on whole images
  // (which then must all share one size).
  Dataset(const std::string& source, int scale, int crop, uint64_t seed);

  int scale() const { return scale_; }
  int crop() const { return crop_; }
  uint64_t seed() const { return seed_; }
  size_t size() const { return paths_.size(); }
  const std::vector<std::string>& paths() const { return paths_; }

  // Decoded (lr, hr) pair for one image, loaded on first use and cached.
  const std::pair<ImageF, ImageF>& pair(size_t index) const;

 private:
  std::vector<std::string> paths_;
  int scale_;
  int crop_;
  uint64_t seed_;
  mutable std::vector<std::unique_ptr<std::pair<ImageF, ImageF>>> cache_;
};

// Batch `batch` aligned LR/HR crops as a pure function of
// (dataset seed, step): draw d = step*batch + i picks an image index and a
// crop offset on the LR grid; the HR window sits at scale times that offset.
Batch sample_batch(const Dataset& ds, int batch, int64_t step);

}  // namespace latis
