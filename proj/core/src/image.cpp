#include "latis/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "latis/common.hpp"

namespace latis {

namespace {

// Catmull-Rom kernel (cubic with a = -0.5), support |t| < 2.
double cubic_kernel(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
  return 0.0;
}

struct Taps {
  std::vector<int> start;       // first source index per output index
  std::vector<int> count;       // taps per output index (uniform)
  std::vector<double> weights;  // count weights per output index
};

// Tap table for resampling an axis of length `in` to length `out`. When
// shrinking, the kernel is stretched by in/out so it acts as a low-pass
// filter; weights are renormalized to sum to one exactly.
Taps make_taps(int in, int out) {
  const double ratio = double(in) / double(out);
  const double scale = std::max(1.0, ratio);
  const double radius = 2.0 * scale;
  const int max_taps = int(std::ceil(2.0 * radius)) + 1;
  Taps t;
  t.start.resize(out);
  t.count.assign(out, max_taps);
  t.weights.assign(int64_t(out) * max_taps, 0.0);
  for (int o = 0; o < out; ++o) {
    const double center = (o + 0.5) * ratio - 0.5;
    const int lo = int(std::ceil(center - radius));
    t.start[o] = lo;
    double sum = 0.0;
    double* w = t.weights.data() + int64_t(o) * max_taps;
    for (int i = 0; i < max_taps; ++i) {
      w[i] = cubic_kernel((lo + i - center) / scale);
      sum += w[i];
    }
    for (int i = 0; i < max_taps; ++i) w[i] /= sum;
  }
  return t;
}

}  // namespace

ImageF bicubic_resize(const ImageF& src, int out_h, int out_w) {
  if (src.height < 1 || src.width < 1 || out_h < 1 || out_w < 1)
    throw ShapeError("bicubic_resize: image dimensions must be positive");
  const Taps tx = make_taps(src.width, out_w);
  const Taps ty = make_taps(src.height, out_h);
  const int ntx = tx.count[0], nty = ty.count[0];

  // Horizontal pass into a double buffer, then vertical.
  std::vector<double> mid(int64_t(src.height) * out_w);
  for (int y = 0; y < src.height; ++y) {
    const float* row = src.pixels.data() + int64_t(y) * src.width;
    for (int x = 0; x < out_w; ++x) {
      const double* w = tx.weights.data() + int64_t(x) * ntx;
      double acc = 0.0;
      for (int i = 0; i < ntx; ++i) {
        const int sx = std::clamp(tx.start[x] + i, 0, src.width - 1);
        acc += w[i] * row[sx];
      }
      mid[int64_t(y) * out_w + x] = acc;
    }
  }
  ImageF dst(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const double* w = ty.weights.data() + int64_t(y) * nty;
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < nty; ++i) {
        const int sy = std::clamp(ty.start[y] + i, 0, src.height - 1);
        acc += w[i] * mid[int64_t(sy) * out_w + x];
      }
      dst.at(y, x) = float(std::clamp(acc, 0.0, 1.0));
    }
  }
  return dst;
}

double psnr(const ImageF& a, const ImageF& b) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError("psnr: image sizes differ");
  if (a.numel() == 0) throw ShapeError("psnr: empty image");
  double se = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = double(a.pixels[i]) - double(b.pixels[i]);
    se += d * d;
  }
  const double mse = se / double(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

// Symmetric reflection: ..., 2, 1, 0 | 0, 1, 2, ..., n-1 | n-1, n-2, ...
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i = ((i % period) + period) % period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

double ssim(const ImageF& a, const ImageF& b) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError("ssim: image sizes differ");
  if (a.numel() == 0) throw ShapeError("ssim: empty image");
  constexpr int R = 5;  // 11x11 window
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  double win[2 * R + 1][2 * R + 1];
  double wsum = 0.0;
  for (int dy = -R; dy <= R; ++dy)
    for (int dx = -R; dx <= R; ++dx) {
      const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
      win[dy + R][dx + R] = g;
      wsum += g;
    }
  for (auto& row : win)
    for (double& w : row) w /= wsum;

  const int H = a.height, W = a.width;
  double total = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double ma = 0.0, mb = 0.0, maa = 0.0, mbb = 0.0, mab = 0.0;
      for (int dy = -R; dy <= R; ++dy) {
        const int sy = reflect(y + dy, H);
        for (int dx = -R; dx <= R; ++dx) {
          const int sx = reflect(x + dx, W);
          const double w = win[dy + R][dx + R];
          const double va = a.at(sy, sx), vb = b.at(sy, sx);
          ma += w * va;
          mb += w * vb;
          maa += w * va * va;
          mbb += w * vb * vb;
          mab += w * va * vb;
        }
      }
      const double var_a = maa - ma * ma;
      const double var_b = mbb - mb * mb;
      const double cov = mab - ma * mb;
      total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
    }
  }
  return total / double(a.numel());
}

}  // namespace latis
