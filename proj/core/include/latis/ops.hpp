// Differentiable pointwise, normalization, permutation, and reduction ops.
// Every op validates shapes up front (ShapeError) and installs an exact
// hand-written backward; derivatives at kinks (relu at 0, clamp at the
// boundary, max ties) use the subgradient 0 / first-index conventions.
#pragma once

#include <cmath>
#include <cstring>

#include "latis/tensor.hpp"

namespace latis {

enum class ElementwiseKind { silu, sigmoid, relu, clamp01, add, sub, mul, scale };

namespace detail {

template <typename T>
T sigmoid_val(T x) {
  // Evaluate through exp of a negative argument only, so large |x| saturates
  // to 0/1 instead of overflowing.
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> y(a.numel());
  const auto& x = a.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = detail::sigmoid_val(x[i]);
  return detail::make_op<T>(
      "sigmoid", a.shape(), std::move(y), {a},
      [](detail::Node<T>& self) {
        auto& pg = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < pg.size(); ++i) {
          T s = self.values[i];
          pg[i] += self.grad[i] * s * (T(1) - s);
        }
      });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  std::vector<T> y(a.numel());
  const auto& x = a.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] * detail::sigmoid_val(x[i]);
  return detail::make_op<T>(
      "silu", a.shape(), std::move(y), {a},
      [](detail::Node<T>& self) {
        const auto& x = self.parents[0]->values;
        auto& pg = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < pg.size(); ++i) {
          T s = detail::sigmoid_val(x[i]);
          pg[i] += self.grad[i] * (s + x[i] * s * (T(1) - s));
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> y(a.numel());
  const auto& x = a.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return detail::make_op<T>(
      "relu", a.shape(), std::move(y), {a},
      [](detail::Node<T>& self) {
        const auto& x = self.parents[0]->values;
        auto& pg = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < pg.size(); ++i)
          if (x[i] > T(0)) pg[i] += self.grad[i];
      });
}

// Clamp to [0,1]; gradient is zero outside the open interval.
template <typename T>
Tensor<T> clamp01(const Tensor<T>& a) {
  std::vector<T> y(a.numel());
  const auto& x = a.values();
  for (size_t i = 0; i < y.size(); ++i)
    y[i] = x[i] < T(0) ? T(0) : (x[i] > T(1) ? T(1) : x[i]);
  return detail::make_op<T>(
      "clamp01", a.shape(), std::move(y), {a},
      [](detail::Node<T>& self) {
        const auto& x = self.parents[0]->values;
        auto& pg = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < pg.size(); ++i)
          if (x[i] > T(0) && x[i] < T(1)) pg[i] += self.grad[i];
      });
}

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op) {
  check_shape(a.shape() == b.shape(),
              std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                  " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
  return detail::make_op<T>(
      "add", a.shape(), std::move(y), {a, b},
      [](detail::Node<T>& self) {
        for (int p = 0; p < 2; ++p) {
          if (!self.parents[p]->requires_grad) continue;
          auto& pg = self.parents[p]->grad_buffer();
          for (size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] - b.values()[i];
  return detail::make_op<T>(
      "sub", a.shape(), std::move(y), {a, b},
      [](detail::Node<T>& self) {
        if (self.parents[0]->requires_grad) {
          auto& pg = self.parents[0]->grad_buffer();
          for (size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
        }
        if (self.parents[1]->requires_grad) {
          auto& pg = self.parents[1]->grad_buffer();
          for (size_t i = 0; i < pg.size(); ++i) pg[i] -= self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<T> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * b.values()[i];
  return detail::make_op<T>(
      "mul", a.shape(), std::move(y), {a, b},
      [](detail::Node<T>& self) {
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        if (self.parents[0]->requires_grad) {
          auto& pg = self.parents[0]->grad_buffer();
          for (size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * bv[i];
        }
        if (self.parents[1]->requires_grad) {
          auto& pg = self.parents[1]->grad_buffer();
          for (size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * av[i];
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * c;
  return detail::make_op<T>(
      "scale", a.shape(), std::move(y), {a},
      [c](detail::Node<T>& self) {
        auto& pg = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * c;
      });
}

// Kind-dispatched entry points; scale carries a parameter and has no
// dispatcher form.
template <typename T>
Tensor<T> elementwise(ElementwiseKind kind, const Tensor<T>& a) {
  switch (kind) {
    case ElementwiseKind::silu: return silu(a);
    case ElementwiseKind::sigmoid: return sigmoid(a);
    case ElementwiseKind::relu: return relu(a);
    case ElementwiseKind::clamp01: return clamp01(a);
    default: throw UsageError("elementwise: kind is not unary");
  }
}

template <typename T>
Tensor<T> elementwise(ElementwiseKind kind, const Tensor<T>& a,
                      const Tensor<T>& b) {
  switch (kind) {
    case ElementwiseKind::add: return add(a, b);
    case ElementwiseKind::sub: return sub(a, b);
    case ElementwiseKind::mul: return mul(a, b);
    default: throw UsageError("elementwise: kind is not binary");
  }
}

// Numerically stable softmax along one axis: max-subtraction before exp,
// normalization per fiber.
template <typename T>
Tensor<T> softmax_axis(const Tensor<T>& x, int axis) {
  const auto& sh = x.shape();
  check_shape(axis >= 0 && axis < x.rank(), "softmax_axis: axis out of range");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= sh[i];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= sh[i];
  const int len = sh[axis];
  const auto& xv = x.values();
  std::vector<T> y(x.numel());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      T m = xv[base];
      for (int j = 1; j < len; ++j)
        m = std::max(m, xv[base + j * inner]);
      T sum = T(0);
      for (int j = 0; j < len; ++j) {
        T e = std::exp(xv[base + j * inner] - m);
        y[base + j * inner] = e;
        sum += e;
      }
      T norm = T(1) / sum;
      for (int j = 0; j < len; ++j) y[base + j * inner] *= norm;
    }
  }
  return detail::make_op<T>(
      "softmax_axis", sh, std::move(y), {x},
      [outer, inner, len](detail::Node<T>& self) {
        auto& pg = self.parents[0]->grad_buffer();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            T dot = T(0);
            for (int j = 0; j < len; ++j)
              dot += self.grad[base + j * inner] * self.values[base + j * inner];
            for (int j = 0; j < len; ++j) {
              const int64_t ix = base + j * inner;
              pg[ix] += self.values[ix] * (self.grad[ix] - dot);
            }
          }
        }
      });
}

// Layer normalization over a [N,C,H,W] tensor with per-channel affine
// parameters gamma, beta of shape [C].
//   per_position = false: statistics over all of (C,H,W) for each sample.
//   per_position = true:  statistics over C independently at each (n,h,w).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5),
                     bool per_position = false) {
  check_shape(x.rank() == 4, "layer_norm: input must be [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_shape(gamma.rank() == 1 && gamma.dim(0) == C,
              "layer_norm: gamma must be [C]");
  check_shape(beta.rank() == 1 && beta.dim(0) == C,
              "layer_norm: beta must be [C]");
  const int64_t hw = int64_t(H) * W;
  const int64_t groups = per_position ? int64_t(N) * hw : N;
  const int64_t gsize = per_position ? C : C * hw;
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();

  // Element index of member j in group g, plus its channel. For per-sample
  // groups the members are contiguous; for per-position they stride by H*W.
  auto member = [=](int64_t g, int64_t j, int64_t& idx, int& ch) {
    if (per_position) {
      int64_t n = g / hw, pos = g % hw;
      idx = (n * C + j) * hw + pos;
      ch = static_cast<int>(j);
    } else {
      idx = g * gsize + j;
      ch = static_cast<int>(j / hw);
    }
  };

  auto mean_v = std::make_shared<std::vector<T>>(groups);
  auto istd_v = std::make_shared<std::vector<T>>(groups);
  std::vector<T> y(x.numel());
  for (int64_t g = 0; g < groups; ++g) {
    T sum = T(0);
    for (int64_t j = 0; j < gsize; ++j) {
      int64_t idx; int ch;
      member(g, j, idx, ch);
      sum += xv[idx];
    }
    T mu = sum / T(gsize);
    T var = T(0);
    for (int64_t j = 0; j < gsize; ++j) {
      int64_t idx; int ch;
      member(g, j, idx, ch);
      T d = xv[idx] - mu;
      var += d * d;
    }
    var /= T(gsize);
    T istd = T(1) / std::sqrt(var + eps);
    (*mean_v)[g] = mu;
    (*istd_v)[g] = istd;
    for (int64_t j = 0; j < gsize; ++j) {
      int64_t idx; int ch;
      member(g, j, idx, ch);
      y[idx] = gv[ch] * (xv[idx] - mu) * istd + bv[ch];
    }
  }
  return detail::make_op<T>(
      "layer_norm", x.shape(), std::move(y), {x, gamma, beta},
      [=](detail::Node<T>& self) {
        const auto& xv2 = self.parents[0]->values;
        const auto& gv2 = self.parents[1]->values;
        const bool need_x = self.parents[0]->requires_grad;
        const bool need_g = self.parents[1]->requires_grad;
        const bool need_b = self.parents[2]->requires_grad;
        for (int64_t g = 0; g < groups; ++g) {
          const T mu = (*mean_v)[g];
          const T istd = (*istd_v)[g];
          // gh = dL/dxhat; two group means feed the input gradient.
          T sum_gh = T(0), sum_ghx = T(0);
          for (int64_t j = 0; j < gsize; ++j) {
            int64_t idx; int ch;
            member(g, j, idx, ch);
            T xhat = (xv2[idx] - mu) * istd;
            T gh = self.grad[idx] * gv2[ch];
            sum_gh += gh;
            sum_ghx += gh * xhat;
            if (need_g) self.parents[1]->grad_buffer()[ch] += self.grad[idx] * xhat;
            if (need_b) self.parents[2]->grad_buffer()[ch] += self.grad[idx];
          }
          if (need_x) {
            auto& xg = self.parents[0]->grad_buffer();
            const T inv_n = T(1) / T(gsize);
            for (int64_t j = 0; j < gsize; ++j) {
              int64_t idx; int ch;
              member(g, j, idx, ch);
              T xhat = (xv2[idx] - mu) * istd;
              T gh = self.grad[idx] * gv2[ch];
              xg[idx] += istd * (gh - inv_n * sum_gh - xhat * inv_n * sum_ghx);
            }
          }
        }
      });
}

// Deinterleave channels across g groups: input channel c moves to output
// channel (c mod g) * (C/g) + floor(c/g). Applying shuffle(g) then
// shuffle(C/g) restores the original order.
template <typename T>
Tensor<T> channel_shuffle(const Tensor<T>& x, int groups) {
  check_shape(x.rank() == 4, "channel_shuffle: input must be [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_shape(groups >= 1 && C % groups == 0,
              "channel_shuffle: channels not divisible by groups");
  const int64_t hw = int64_t(H) * W;
  const int cg = C / groups;
  const auto& xv = x.values();
  std::vector<T> y(x.numel());
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const int oc = (c % groups) * cg + c / groups;
      std::memcpy(&y[(int64_t(n) * C + oc) * hw],
                  &xv[(int64_t(n) * C + c) * hw], sizeof(T) * hw);
    }
  }
  return detail::make_op<T>(
      "channel_shuffle", x.shape(), std::move(y), {x},
      [N, C, groups, cg, hw](detail::Node<T>& self) {
        auto& pg = self.parents[0]->grad_buffer();
        for (int n = 0; n < N; ++n) {
          for (int c = 0; c < C; ++c) {
            const int oc = (c % groups) * cg + c / groups;
            const T* src = &self.grad[(int64_t(n) * C + oc) * hw];
            T* dst = &pg[(int64_t(n) * C + c) * hw];
            for (int64_t i = 0; i < hw; ++i) dst[i] += src[i];
          }
        }
      });
}

// Rearrange [N, C*s^2, H, W] into [N, C, H*s, W*s]:
//   out[n, c, s*h+dy, s*w+dx] = in[n, c*s^2 + dy*s + dx, h, w].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int s) {
  check_shape(x.rank() == 4, "pixel_shuffle: input must be [N,C,H,W]");
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_shape(s >= 1 && Cin % (s * s) == 0,
              "pixel_shuffle: channels not divisible by s^2");
  const int C = Cin / (s * s);
  const int Ho = H * s, Wo = W * s;
  const auto& xv = x.values();
  std::vector<T> y(int64_t(N) * C * Ho * Wo);
  auto in_at = [&](int n, int c, int h, int w) -> int64_t {
    return ((int64_t(n) * Cin + c) * H + h) * W + w;
  };
  auto out_at = [&](int n, int c, int h, int w) -> int64_t {
    return ((int64_t(n) * C + c) * Ho + h) * Wo + w;
  };
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx) {
          const int ic = c * s * s + dy * s + dx;
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
              y[out_at(n, c, s * h + dy, s * w + dx)] = xv[in_at(n, ic, h, w)];
        }
  return detail::make_op<T>(
      "pixel_shuffle", {N, C, Ho, Wo}, std::move(y), {x},
      [N, C, Cin, H, W, Ho, Wo, s](detail::Node<T>& self) {
        auto& pg = self.parents[0]->grad_buffer();
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c)
            for (int dy = 0; dy < s; ++dy)
              for (int dx = 0; dx < s; ++dx) {
                const int ic = c * s * s + dy * s + dx;
                for (int h = 0; h < H; ++h)
                  for (int w = 0; w < W; ++w) {
                    const int64_t oi =
                        ((int64_t(n) * C + c) * Ho + s * h + dy) * Wo +
                        s * w + dx;
                    const int64_t ii =
                        ((int64_t(n) * Cin + ic) * H + h) * W + w;
                    pg[ii] += self.grad[oi];
                  }
              }
      });
}

enum class ReduceKind { sum, mean, max_spatial, mean_spatial, max_channel, mean_channel };

// sum/mean collapse to a scalar; the *_spatial kinds map [N,C,H,W] to
// [N,C,1,1], the *_channel kinds to [N,1,H,W]. Max gradients flow to the
// first maximal element in scan order.
template <typename T>
Tensor<T> reduce(const Tensor<T>& x, ReduceKind kind) {
  const auto& xv = x.values();
  if (kind == ReduceKind::sum || kind == ReduceKind::mean) {
    T acc = T(0);
    for (T v : xv) acc += v;
    const T k = kind == ReduceKind::mean ? T(1) / T(x.numel()) : T(1);
    return detail::make_op<T>(
        kind == ReduceKind::mean ? "reduce_mean" : "reduce_sum", {1},
        {acc * k}, {x},
        [k](detail::Node<T>& self) {
          auto& pg = self.parents[0]->grad_buffer();
          const T g = self.grad[0] * k;
          for (size_t i = 0; i < pg.size(); ++i) pg[i] += g;
        });
  }
  check_shape(x.rank() == 4, "reduce: spatial/channel kinds need [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t hw = int64_t(H) * W;
  switch (kind) {
    case ReduceKind::mean_spatial: {
      std::vector<T> y(int64_t(N) * C);
      for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
        T acc = T(0);
        for (int64_t i = 0; i < hw; ++i) acc += xv[nc * hw + i];
        y[nc] = acc / T(hw);
      }
      return detail::make_op<T>(
          "mean_spatial", {N, C, 1, 1}, std::move(y), {x},
          [N, C, hw](detail::Node<T>& self) {
            auto& pg = self.parents[0]->grad_buffer();
            for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
              const T g = self.grad[nc] / T(hw);
              for (int64_t i = 0; i < hw; ++i) pg[nc * hw + i] += g;
            }
          });
    }
    case ReduceKind::max_spatial: {
      std::vector<T> y(int64_t(N) * C);
      auto arg = std::make_shared<std::vector<int64_t>>(int64_t(N) * C);
      for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
        int64_t best = 0;
        for (int64_t i = 1; i < hw; ++i)
          if (xv[nc * hw + i] > xv[nc * hw + best]) best = i;
        y[nc] = xv[nc * hw + best];
        (*arg)[nc] = best;
      }
      return detail::make_op<T>(
          "max_spatial", {N, C, 1, 1}, std::move(y), {x},
          [N, C, hw, arg](detail::Node<T>& self) {
            auto& pg = self.parents[0]->grad_buffer();
            for (int64_t nc = 0; nc < int64_t(N) * C; ++nc)
              pg[nc * hw + (*arg)[nc]] += self.grad[nc];
          });
    }
    case ReduceKind::mean_channel: {
      std::vector<T> y(int64_t(N) * hw);
      for (int n = 0; n < N; ++n)
        for (int64_t i = 0; i < hw; ++i) {
          T acc = T(0);
          for (int c = 0; c < C; ++c) acc += xv[(int64_t(n) * C + c) * hw + i];
          y[int64_t(n) * hw + i] = acc / T(C);
        }
      return detail::make_op<T>(
          "mean_channel", {N, 1, H, W}, std::move(y), {x},
          [N, C, hw](detail::Node<T>& self) {
            auto& pg = self.parents[0]->grad_buffer();
            for (int n = 0; n < N; ++n)
              for (int64_t i = 0; i < hw; ++i) {
                const T g = self.grad[int64_t(n) * hw + i] / T(C);
                for (int c = 0; c < C; ++c)
                  pg[(int64_t(n) * C + c) * hw + i] += g;
              }
          });
    }
    case ReduceKind::max_channel: {
      std::vector<T> y(int64_t(N) * hw);
      auto arg = std::make_shared<std::vector<int>>(int64_t(N) * hw);
      for (int n = 0; n < N; ++n)
        for (int64_t i = 0; i < hw; ++i) {
          int best = 0;
          for (int c = 1; c < C; ++c)
            if (xv[(int64_t(n) * C + c) * hw + i] >
                xv[(int64_t(n) * C + best) * hw + i])
              best = c;
          y[int64_t(n) * hw + i] = xv[(int64_t(n) * C + best) * hw + i];
          (*arg)[int64_t(n) * hw + i] = best;
        }
      return detail::make_op<T>(
          "max_channel", {N, 1, H, W}, std::move(y), {x},
          [N, C, hw, arg](detail::Node<T>& self) {
            auto& pg = self.parents[0]->grad_buffer();
            for (int n = 0; n < N; ++n)
              for (int64_t i = 0; i < hw; ++i) {
                const int c = (*arg)[int64_t(n) * hw + i];
                pg[(int64_t(n) * C + c) * hw + i] +=
                    self.grad[int64_t(n) * hw + i];
              }
          });
    }
    default:
      throw UsageError("reduce: unknown kind");
  }
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> shape) {
  int64_t n = 1;
  for (int d : shape) {
    check_shape(d > 0, "reshape: non-positive dimension");
    n *= d;
  }
  check_shape(n == x.numel(), "reshape: element count mismatch");
  std::vector<T> y = x.values();
  return detail::make_op<T>(
      "reshape", std::move(shape), std::move(y), {x},
      [](detail::Node<T>& self) {
        auto& pg = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
      });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  check_shape(a.rank() == 4 && b.rank() == 4,
              "concat_channels: inputs must be [N,C,H,W]");
  check_shape(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) &&
                  a.dim(3) == b.dim(3),
              "concat_channels: N/H/W mismatch");
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  const int H = a.dim(2), W = a.dim(3);
  const int64_t hw = int64_t(H) * W;
  std::vector<T> y(int64_t(N) * (Ca + Cb) * hw);
  for (int n = 0; n < N; ++n) {
    std::memcpy(&y[int64_t(n) * (Ca + Cb) * hw],
                &a.values()[int64_t(n) * Ca * hw], sizeof(T) * Ca * hw);
    std::memcpy(&y[(int64_t(n) * (Ca + Cb) + Ca) * hw],
                &b.values()[int64_t(n) * Cb * hw], sizeof(T) * Cb * hw);
  }
  return detail::make_op<T>(
      "concat_channels", {N, Ca + Cb, H, W}, std::move(y), {a, b},
      [N, Ca, Cb, hw](detail::Node<T>& self) {
        for (int n = 0; n < N; ++n) {
          if (self.parents[0]->requires_grad) {
            auto& ag = self.parents[0]->grad_buffer();
            const T* src = &self.grad[int64_t(n) * (Ca + Cb) * hw];
            for (int64_t i = 0; i < Ca * hw; ++i)
              ag[int64_t(n) * Ca * hw + i] += src[i];
          }
          if (self.parents[1]->requires_grad) {
            auto& bg = self.parents[1]->grad_buffer();
            const T* src = &self.grad[(int64_t(n) * (Ca + Cb) + Ca) * hw];
            for (int64_t i = 0; i < Cb * hw; ++i)
              bg[int64_t(n) * Cb * hw + i] += src[i];
          }
        }
      });
}

// x[N,C,H,W] * gate[N,C,1,1], gate broadcast over the spatial plane.
template <typename T>
Tensor<T> mul_channel_gate(const Tensor<T>& x, const Tensor<T>& gate) {
  check_shape(x.rank() == 4, "mul_channel_gate: input must be [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_shape(gate.rank() == 4 && gate.dim(0) == N && gate.dim(1) == C &&
                  gate.dim(2) == 1 && gate.dim(3) == 1,
              "mul_channel_gate: gate must be [N,C,1,1]");
  const int64_t hw = int64_t(H) * W;
  std::vector<T> y(x.numel());
  for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
    const T g = gate.values()[nc];
    for (int64_t i = 0; i < hw; ++i) y[nc * hw + i] = x.values()[nc * hw + i] * g;
  }
  return detail::make_op<T>(
      "mul_channel_gate", x.shape(), std::move(y), {x, gate},
      [N, C, hw](detail::Node<T>& self) {
        const auto& xv = self.parents[0]->values;
        const auto& gv = self.parents[1]->values;
        for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
          if (self.parents[0]->requires_grad) {
            auto& xg = self.parents[0]->grad_buffer();
            for (int64_t i = 0; i < hw; ++i)
              xg[nc * hw + i] += self.grad[nc * hw + i] * gv[nc];
          }
          if (self.parents[1]->requires_grad) {
            T acc = T(0);
            for (int64_t i = 0; i < hw; ++i)
              acc += self.grad[nc * hw + i] * xv[nc * hw + i];
            self.parents[1]->grad_buffer()[nc] += acc;
          }
        }
      });
}

// x[N,C,H,W] * gate[N,1,H,W], gate broadcast across channels.
template <typename T>
Tensor<T> mul_spatial_gate(const Tensor<T>& x, const Tensor<T>& gate) {
  check_shape(x.rank() == 4, "mul_spatial_gate: input must be [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_shape(gate.rank() == 4 && gate.dim(0) == N && gate.dim(1) == 1 &&
                  gate.dim(2) == H && gate.dim(3) == W,
              "mul_spatial_gate: gate must be [N,1,H,W]");
  const int64_t hw = int64_t(H) * W;
  std::vector<T> y(x.numel());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int64_t i = 0; i < hw; ++i)
        y[(int64_t(n) * C + c) * hw + i] =
            x.values()[(int64_t(n) * C + c) * hw + i] *
            gate.values()[int64_t(n) * hw + i];
  return detail::make_op<T>(
      "mul_spatial_gate", x.shape(), std::move(y), {x, gate},
      [N, C, hw](detail::Node<T>& self) {
        const auto& xv = self.parents[0]->values;
        const auto& gv = self.parents[1]->values;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const int64_t xb = (int64_t(n) * C + c) * hw;
            const int64_t gb = int64_t(n) * hw;
            if (self.parents[0]->requires_grad) {
              auto& xg = self.parents[0]->grad_buffer();
              for (int64_t i = 0; i < hw; ++i)
                xg[xb + i] += self.grad[xb + i] * gv[gb + i];
            }
            if (self.parents[1]->requires_grad) {
              auto& gg = self.parents[1]->grad_buffer();
              for (int64_t i = 0; i < hw; ++i)
                gg[gb + i] += self.grad[xb + i] * xv[xb + i];
            }
          }
      });
}

}  // namespace latis
