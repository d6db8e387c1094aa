// Training objective: an L1 content term plus an optional histogram-matching
// term that compares per-patch intensity distributions through their CDFs
// (a squared earth-mover distance on the binned values). The histogram is
// made differentiable by counting each pixel with a difference of two
// sigmoids instead of a hard bin indicator.
#pragma once

#include <cmath>

#include "latis/ops.hpp"
#include "latis/tensor.hpp"

namespace latis {

struct HistogramConfig {
  int bins = 256;
  // Bin k covers [k*bin_width, (k+1)*bin_width) with center (k+0.5)*bin_width.
  double bin_width = 1.0 / 256.0;
  // Sigmoid temperature W. At bin_width/2 the soft count is a gentle ramp;
  // shrinking it toward bin_width/20 approaches hard counting.
  double smooth_width = 1.0 / 512.0;
  // Patch edge for the patchwise loss; images are tiled without overlap and
  // a partial row/column of pixels at the bottom/right is ignored.
  int patch = 8;
};

// Histogram-loss weight as a function of the 0-based epoch: a constant while
// epoch < cutoff_epoch, then exactly zero (the term is skipped entirely).
struct LossSchedule {
  double lambda_weight = 0.125;
  int cutoff_epoch = 5;

  double weight_at(int epoch) const {
    return epoch < cutoff_epoch ? lambda_weight : 0.0;
  }
};

namespace detail {

// Soft bin membership: Pi_k(y) rises from 0 to 1 as y crosses bin k,
// integrating to ~bin_width; the two-sigmoid difference peaks at the bin
// center. Contributions further than cutoff_radius from a center are below
// exp(-45) and are skipped.
template <typename T>
struct SoftBinKernel {
  T inv_w;      // 1 / smooth_width
  T half_l;     // bin_width / 2
  T bin_w;      // bin_width
  int bins;
  T cutoff_radius;

  explicit SoftBinKernel(const HistogramConfig& cfg)
      : inv_w(T(1.0 / cfg.smooth_width)),
        half_l(T(cfg.bin_width / 2)),
        bin_w(T(cfg.bin_width)),
        bins(cfg.bins),
        cutoff_radius(T(cfg.bin_width / 2 + 45.0 * cfg.smooth_width)) {}

  T center(int k) const { return (T(k) + T(0.5)) * bin_w; }
  void bin_range(T y, int& lo, int& hi) const {
    lo = std::max(0, int(std::floor((y - cutoff_radius) / bin_w - T(0.5))));
    hi = std::min(bins - 1,
                  int(std::ceil((y + cutoff_radius) / bin_w - T(0.5))));
  }
  T weight(T y, int k) const {
    const T d = y - center(k);
    return sigmoid_val((d + half_l) * inv_w) -
           sigmoid_val((d - half_l) * inv_w);
  }
  T weight_grad(T y, int k) const {
    const T d = y - center(k);
    const T sp = sigmoid_val((d + half_l) * inv_w);
    const T sm = sigmoid_val((d - half_l) * inv_w);
    return (sp * (T(1) - sp) - sm * (T(1) - sm)) * inv_w;
  }
};

// Accumulate the soft histogram of `count` values into hist[bins]
// (unnormalized soft counts).
template <typename T>
void soft_counts(const T* vals, int64_t count, const SoftBinKernel<T>& k,
                 T* hist) {
  for (int64_t i = 0; i < count; ++i) {
    int lo, hi;
    k.bin_range(vals[i], lo, hi);
    for (int b = lo; b <= hi; ++b) hist[b] += k.weight(vals[i], b);
  }
}

}  // namespace detail

// Mean absolute error over all elements.
template <typename T>
Tensor<T> l1_content_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::check_same_shape(pred, target, "l1_content_loss");
  const auto& p = pred.values();
  const auto& t = target.values();
  T acc = T(0);
  for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
  const T inv_n = T(1) / T(pred.numel());
  return detail::make_op<T>(
      "l1_content_loss", {1}, {acc * inv_n}, {pred, target},
      [inv_n](detail::Node<T>& self) {
        const auto& p = self.parents[0]->values;
        const auto& t = self.parents[1]->values;
        const T g = self.grad[0] * inv_n;
        for (int side = 0; side < 2; ++side) {
          if (!self.parents[side]->requires_grad) continue;
          auto& pg = self.parents[side]->grad_buffer();
          const T sgn = side == 0 ? T(1) : T(-1);
          for (size_t i = 0; i < pg.size(); ++i) {
            const T d = p[i] - t[i];
            if (d > T(0)) pg[i] += sgn * g;
            else if (d < T(0)) pg[i] -= sgn * g;
          }
        }
      });
}

// Soft histogram of all values in x, normalized by the element count so the
// bins sum to ~1 for in-range data. Differentiable in x.
template <typename T>
Tensor<T> soft_histogram(const Tensor<T>& x, const HistogramConfig& cfg) {
  const detail::SoftBinKernel<T> kern(cfg);
  std::vector<T> h(cfg.bins, T(0));
  detail::soft_counts(x.values().data(), x.numel(), kern, h.data());
  const T inv_n = T(1) / T(x.numel());
  for (T& v : h) v *= inv_n;
  return detail::make_op<T>(
      "soft_histogram", {cfg.bins}, std::move(h), {x},
      [kern, inv_n](detail::Node<T>& self) {
        const auto& xv = self.parents[0]->values;
        auto& pg = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < xv.size(); ++i) {
          int lo, hi;
          kern.bin_range(xv[i], lo, hi);
          T acc = T(0);
          for (int b = lo; b <= hi; ++b)
            acc += self.grad[b] * kern.weight_grad(xv[i], b);
          pg[i] += acc * inv_n;
        }
      });
}

// Patchwise histogram-matching loss between two [N,1,H,W] tensors.
// Both inputs are clamped to [0,1]; each non-overlapping patch contributes
// the squared L2 distance between the CDFs of its two soft histograms
// (each histogram normalized by the patch pixel count); the total is divided
// by the number of tiled pixels per image times the batch size. Identical
// inputs give exactly zero and the loss is symmetric in its arguments.
template <typename T>
Tensor<T> patchwise_emd_loss(const Tensor<T>& pred, const Tensor<T>& target,
                             const HistogramConfig& cfg) {
  detail::check_same_shape(pred, target, "patchwise_emd_loss");
  check_shape(pred.rank() == 4 && pred.dim(1) == 1,
              "patchwise_emd_loss: inputs must be [N,1,H,W]");
  const int N = pred.dim(0), H = pred.dim(2), W = pred.dim(3);
  const int P = cfg.patch;
  check_shape(P >= 1, "patchwise_emd_loss: patch size must be positive");
  check_shape(H >= P && W >= P,
              "patchwise_emd_loss: image " + std::to_string(H) + "x" +
                  std::to_string(W) + " is smaller than one " +
                  std::to_string(P) + "x" + std::to_string(P) + " patch");
  const int ty = H / P, tx = W / P;
  const detail::SoftBinKernel<T> kern(cfg);
  const int bins = cfg.bins;
  const T inv_patch = T(1) / T(P * P);
  const T inv_m = T(1) / (T(N) * T(int64_t(ty) * P) * T(int64_t(tx) * P));

  // Pixels of one patch, clamped, gathered contiguously. Captures by value:
  // the copy inside the backward closure outlives this frame.
  auto gather = [P, H, W](const std::vector<T>& src, int n, int py, int px,
                          T* out) {
    for (int y = 0; y < P; ++y) {
      const int64_t row = ((int64_t(n) * H) + py * P + y) * W + px * P;
      for (int x = 0; x < P; ++x) {
        const T v = src[row + x];
        out[int64_t(y) * P + x] = v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
      }
    }
  };

  std::vector<T> pa(P * P), pb(P * P), h1(bins), h2(bins);
  T total = T(0);
  for (int n = 0; n < N; ++n)
    for (int py = 0; py < ty; ++py)
      for (int px = 0; px < tx; ++px) {
        gather(pred.values(), n, py, px, pa.data());
        gather(target.values(), n, py, px, pb.data());
        std::fill(h1.begin(), h1.end(), T(0));
        std::fill(h2.begin(), h2.end(), T(0));
        detail::soft_counts(pa.data(), P * P, kern, h1.data());
        detail::soft_counts(pb.data(), P * P, kern, h2.data());
        T c1 = T(0), c2 = T(0);
        for (int b = 0; b < bins; ++b) {
          c1 += h1[b] * inv_patch;
          c2 += h2[b] * inv_patch;
          const T d = c1 - c2;
          total += d * d;
        }
      }
  total *= inv_m;

  return detail::make_op<T>(
      "patchwise_emd_loss", {1}, {total}, {pred, target},
      [=](detail::Node<T>& self) {
        const auto& pv = self.parents[0]->values;
        const auto& tv = self.parents[1]->values;
        const T gout = self.grad[0];
        std::vector<T> qa(P * P), qb(P * P), g1(bins), g2(bins);
        std::vector<T> suffix(bins);
        for (int n = 0; n < N; ++n)
          for (int py = 0; py < ty; ++py)
            for (int px = 0; px < tx; ++px) {
              gather(pv, n, py, px, qa.data());
              gather(tv, n, py, px, qb.data());
              std::fill(g1.begin(), g1.end(), T(0));
              std::fill(g2.begin(), g2.end(), T(0));
              detail::soft_counts(qa.data(), P * P, kern, g1.data());
              detail::soft_counts(qb.data(), P * P, kern, g2.data());
              // d_k = CDF1_k - CDF2_k; dL/dh1_j = 2 * sum_{k >= j} d_k,
              // all scaled by the two normalizations.
              T c1 = T(0), c2 = T(0);
              for (int b = 0; b < bins; ++b) {
                c1 += g1[b] * inv_patch;
                c2 += g2[b] * inv_patch;
                suffix[b] = c1 - c2;
              }
              for (int b = bins - 2; b >= 0; --b) suffix[b] += suffix[b + 1];
              const T k1 = T(2) * inv_m * inv_patch * gout;
              for (int side = 0; side < 2; ++side) {
                if (!self.parents[side]->requires_grad) continue;
                auto& pg = self.parents[side]->grad_buffer();
                const std::vector<T>& raw =
                    side == 0 ? pv : tv;
                const std::vector<T>& patch = side == 0 ? qa : qb;
                const T sgn = side == 0 ? k1 : -k1;
                for (int y = 0; y < P; ++y)
                  for (int x = 0; x < P; ++x) {
                    const int64_t flat =
                        ((int64_t(n) * H) + py * P + y) * W + px * P + x;
                    // Clamp gate: zero slope outside the open interval.
                    if (raw[flat] <= T(0) || raw[flat] >= T(1)) continue;
                    const T v = patch[int64_t(y) * P + x];
                    int lo, hi;
                    kern.bin_range(v, lo, hi);
                    T acc = T(0);
                    for (int b = lo; b <= hi; ++b)
                      acc += suffix[b] * kern.weight_grad(v, b);
                    pg[flat] += sgn * acc;
                  }
              }
            }
      });
}

// The two loss terms and their scheduled combination for one step.
template <typename T>
struct LossParts {
  Tensor<T> total;
  Tensor<T> content;
  Tensor<T> histogram;  // undefined when the schedule weight is zero
  double lambda = 0.0;
  bool histogram_active = false;
};

template <typename T>
LossParts<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& target,
                           int epoch, const LossSchedule& schedule,
                           const HistogramConfig& cfg) {
  LossParts<T> parts;
  parts.lambda = schedule.weight_at(epoch);
  parts.content = l1_content_loss(pred, target);
  if (parts.lambda > 0.0) {
    parts.histogram = patchwise_emd_loss(pred, target, cfg);
    parts.total = add(parts.content, scale(parts.histogram, T(parts.lambda)));
    parts.histogram_active = true;
  } else {
    // Skipped entirely: no histogram is computed when the weight is zero.
    parts.total = parts.content;
  }
  return parts;
}

}  // namespace latis
