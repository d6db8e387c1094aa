// Convolutions, lowered to im2col + GEMM. One pair of GEMM kernels does all
// the heavy lifting (forward, weight gradient, input gradient); accumulation
// order inside a row is fixed and rows are partitioned statically, so results
// do not depend on the worker count.
#pragma once

#include <cstring>

#include "latis/tensor.hpp"

namespace latis {
namespace detail {

// C[m,n] += A[m,k] * B[k,n], all row-major contiguous.
template <typename T>
void gemm_accum(const T* a, const T* b, T* c, int64_t m, int64_t k,
                int64_t n) {
  parallel_for(m, [&](int64_t r0, int64_t r1) {
    for (int64_t i = r0; i < r1; ++i) {
      const T* ai = a + i * k;
      T* ci = c + i * n;
      for (int64_t kk = 0; kk < k; ++kk) {
        const T av = ai[kk];
        const T* bk = b + kk * n;
        for (int64_t j = 0; j < n; ++j) ci[j] += av * bk[j];
      }
    }
  });
}

// C[m,n] += A[m,k] * B^T, where B is [n,k] row-major.
template <typename T>
void gemm_accum_bt(const T* a, const T* b, T* c, int64_t m, int64_t k,
                   int64_t n) {
  parallel_for(m, [&](int64_t r0, int64_t r1) {
    for (int64_t i = r0; i < r1; ++i) {
      const T* ai = a + i * k;
      T* ci = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const T* bj = b + j * k;
        T acc = T(0);
        for (int64_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
        ci[j] += acc;
      }
    }
  });
}

// Gather padded kh*kw patches of a C-channel image into a
// [C*kh*kw, Ho*Wo] matrix. chan_stride lets callers pass a non-contiguous
// channel axis (used by the lambda convolution, whose channels are
// interleaved with another axis).
template <typename T>
void im2col(const T* in, int C, int64_t chan_stride, int H, int W, int kh,
            int kw, int stride, int pad, int Ho, int Wo, T* cols) {
  for (int c = 0; c < C; ++c) {
    const T* chan = in + c * chan_stride;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* row = cols + (int64_t(c) * kh * kw + ky * kw + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + int64_t(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::memset(dst, 0, sizeof(T) * Wo);
            continue;
          }
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < W) ? chan[int64_t(iy) * W + ix] : T(0);
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-add a [C*kh*kw, Ho*Wo] matrix back onto the
// image grid.
template <typename T>
void col2im_add(const T* cols, int C, int64_t chan_stride, int H, int W,
                int kh, int kw, int stride, int pad, int Ho, int Wo,
                T* grad_in) {
  for (int c = 0; c < C; ++c) {
    T* chan = grad_in + c * chan_stride;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* row = cols + (int64_t(c) * kh * kw + ky * kw + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          const T* src = row + int64_t(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) chan[int64_t(iy) * W + ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2-D convolution of input [N,Cin,H,W] with weight [Cout,Cin,kh,kw] and an
// optional bias [Cout] (pass a default-constructed tensor for none).
// padding = -1 selects "same" padding (kh-1)/2, (kw-1)/2 for stride 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias = Tensor<T>(), int stride = 1,
                 int padding = -1) {
  check_shape(input.rank() == 4, "conv2d: input must be [N,Cin,H,W]");
  check_shape(weight.rank() == 4, "conv2d: weight must be [Cout,Cin,kh,kw]");
  const int N = input.dim(0), Cin = input.dim(1);
  const int H = input.dim(2), W = input.dim(3);
  const int Cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  check_shape(weight.dim(1) == Cin,
              "conv2d: weight expects " + std::to_string(weight.dim(1)) +
                  " input channels, input has " + std::to_string(Cin));
  check_shape(stride >= 1, "conv2d: stride must be positive");
  int ph = padding, pw = padding;
  if (padding < 0) {
    check_shape(kh % 2 == 1 && kw % 2 == 1,
                "conv2d: same padding needs odd kernel sizes");
    ph = (kh - 1) / 2;
    pw = (kw - 1) / 2;
  }
  const int Ho = (H + 2 * ph - kh) / stride + 1;
  const int Wo = (W + 2 * pw - kw) / stride + 1;
  check_shape(H + 2 * ph >= kh && W + 2 * pw >= kw && Ho > 0 && Wo > 0,
              "conv2d: kernel " + std::to_string(kh) + "x" +
                  std::to_string(kw) + " exceeds padded input " +
                  shape_str(input.shape()));
  const bool has_bias = bias.defined();
  if (has_bias)
    check_shape(bias.rank() == 1 && bias.dim(0) == Cout,
                "conv2d: bias must be [Cout]");

  const int64_t K = int64_t(Cin) * kh * kw;
  const int64_t M = int64_t(Ho) * Wo;
  std::vector<T> y(int64_t(N) * Cout * M, T(0));
  std::vector<T> cols(K * M);
  for (int n = 0; n < N; ++n) {
    detail::im2col(input.values().data() + int64_t(n) * Cin * H * W, Cin,
                   int64_t(H) * W, H, W, kh, kw, stride, ph, Ho, Wo,
                   cols.data());
    T* out_n = y.data() + int64_t(n) * Cout * M;
    if (has_bias)
      for (int co = 0; co < Cout; ++co)
        std::fill(out_n + co * M, out_n + (co + 1) * M, bias.values()[co]);
    detail::gemm_accum(weight.values().data(), cols.data(), out_n, Cout, K, M);
  }

  std::vector<Tensor<T>> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return detail::make_op<T>(
      "conv2d", {N, Cout, Ho, Wo}, std::move(y), std::move(parents),
      [=](detail::Node<T>& self) {
        const auto& in_v = self.parents[0]->values;
        const auto& w_v = self.parents[1]->values;
        const bool need_in = self.parents[0]->requires_grad;
        const bool need_w = self.parents[1]->requires_grad;
        const bool need_b = has_bias && self.parents[2]->requires_grad;
        if (need_b) {
          auto& bg = self.parents[2]->grad_buffer();
          for (int n = 0; n < N; ++n)
            for (int co = 0; co < Cout; ++co) {
              const T* g = self.grad.data() + (int64_t(n) * Cout + co) * M;
              T acc = T(0);
              for (int64_t i = 0; i < M; ++i) acc += g[i];
              bg[co] += acc;
            }
        }
        std::vector<T> cols2((need_in || need_w) ? K * M : 0);
        std::vector<T> wt;
        if (need_in) {
          // Transposed weight [K, Cout] reused across samples.
          wt.resize(K * Cout);
          for (int co = 0; co < Cout; ++co)
            for (int64_t kk = 0; kk < K; ++kk)
              wt[kk * Cout + co] = w_v[co * K + kk];
        }
        std::vector<T> tmp(need_in ? K * M : 0);
        for (int n = 0; n < N; ++n) {
          const T* g_n = self.grad.data() + int64_t(n) * Cout * M;
          if (need_w) {
            detail::im2col(in_v.data() + int64_t(n) * Cin * H * W, Cin,
                           int64_t(H) * W, H, W, kh, kw, stride, ph, Ho, Wo,
                           cols2.data());
            detail::gemm_accum_bt(g_n, cols2.data(),
                                  self.parents[1]->grad_buffer().data(), Cout,
                                  M, K);
          }
          if (need_in) {
            std::fill(tmp.begin(), tmp.end(), T(0));
            detail::gemm_accum(wt.data(), g_n, tmp.data(), K, Cout, M);
            detail::col2im_add(tmp.data(), Cin, int64_t(H) * W, H, W, kh, kw,
                               stride, ph, Ho, Wo,
                               self.parents[0]->grad_buffer().data() +
                                   int64_t(n) * Cin * H * W);
          }
        }
      });
}

// The position-local lambda map: input [N,U,V,H,W] convolved with a 3-D
// kernel [K,U,1,r,r] (depth 1 along V, stride 1, same spatial padding),
// producing [N,K,V,H,W]. Because the kernel does not extend along V, each
// (n,v) slice is an independent 2-D convolution from U channels to K
// channels, which reuses the im2col machinery with a strided channel axis.
template <typename T>
Tensor<T> conv3d_lambda(const Tensor<T>& values, const Tensor<T>& kernel,
                        const Tensor<T>& bias = Tensor<T>()) {
  check_shape(values.rank() == 5, "conv3d_lambda: values must be [N,U,V,H,W]");
  check_shape(kernel.rank() == 5,
              "conv3d_lambda: kernel must be [K,U,1,r,r]");
  const int N = values.dim(0), U = values.dim(1), V = values.dim(2);
  const int H = values.dim(3), W = values.dim(4);
  const int Kc = kernel.dim(0), r = kernel.dim(3);
  check_shape(kernel.dim(1) == U,
              "conv3d_lambda: kernel expects " + std::to_string(kernel.dim(1)) +
                  " input channels, values have " + std::to_string(U));
  check_shape(kernel.dim(2) == 1, "conv3d_lambda: kernel depth must be 1");
  check_shape(kernel.dim(4) == r && r % 2 == 1,
              "conv3d_lambda: spatial kernel must be square with odd size");
  const bool has_bias = bias.defined();
  if (has_bias)
    check_shape(bias.rank() == 1 && bias.dim(0) == Kc,
                "conv3d_lambda: bias must be [K]");
  const int pad = (r - 1) / 2;
  const int64_t hw = int64_t(H) * W;
  const int64_t Kdim = int64_t(U) * r * r;      // GEMM contraction length
  const int64_t vhw = int64_t(V) * hw;           // stride between U slices

  std::vector<T> y(int64_t(N) * Kc * V * hw);
  std::vector<T> cols(Kdim * hw);
  std::vector<T> tmp(int64_t(Kc) * hw);
  for (int n = 0; n < N; ++n) {
    for (int vi = 0; vi < V; ++vi) {
      const T* slice =
          values.values().data() + (int64_t(n) * U * V + vi) * hw;
      detail::im2col(slice, U, vhw, H, W, r, r, 1, pad, H, W, cols.data());
      std::fill(tmp.begin(), tmp.end(), T(0));
      detail::gemm_accum(kernel.values().data(), cols.data(), tmp.data(), Kc,
                         Kdim, hw);
      for (int ko = 0; ko < Kc; ++ko) {
        T* dst = y.data() + ((int64_t(n) * Kc + ko) * V + vi) * hw;
        const T b = has_bias ? bias.values()[ko] : T(0);
        const T* src = tmp.data() + int64_t(ko) * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] + b;
      }
    }
  }

  std::vector<Tensor<T>> parents{values, kernel};
  if (has_bias) parents.push_back(bias);
  return detail::make_op<T>(
      "conv3d_lambda", {N, Kc, V, H, W}, std::move(y), std::move(parents),
      [=](detail::Node<T>& self) {
        const auto& in_v = self.parents[0]->values;
        const auto& k_v = self.parents[1]->values;
        const bool need_in = self.parents[0]->requires_grad;
        const bool need_k = self.parents[1]->requires_grad;
        const bool need_b = has_bias && self.parents[2]->requires_grad;
        std::vector<T> gslice(int64_t(Kc) * hw);
        std::vector<T> cols2((need_in || need_k) ? Kdim * hw : 0);
        std::vector<T> kt;
        if (need_in) {
          kt.resize(Kdim * Kc);
          for (int ko = 0; ko < Kc; ++ko)
            for (int64_t kk = 0; kk < Kdim; ++kk)
              kt[kk * Kc + ko] = k_v[ko * Kdim + kk];
        }
        std::vector<T> tmp2(need_in ? Kdim * hw : 0);
        for (int n = 0; n < N; ++n) {
          for (int vi = 0; vi < V; ++vi) {
            for (int ko = 0; ko < Kc; ++ko)
              std::memcpy(gslice.data() + int64_t(ko) * hw,
                          self.grad.data() +
                              ((int64_t(n) * Kc + ko) * V + vi) * hw,
                          sizeof(T) * hw);
            if (need_b) {
              auto& bg = self.parents[2]->grad_buffer();
              for (int ko = 0; ko < Kc; ++ko) {
                T acc = T(0);
                const T* g = gslice.data() + int64_t(ko) * hw;
                for (int64_t i = 0; i < hw; ++i) acc += g[i];
                bg[ko] += acc;
              }
            }
            const T* slice = in_v.data() + (int64_t(n) * U * V + vi) * hw;
            if (need_k) {
              detail::im2col(slice, U, vhw, H, W, r, r, 1, pad, H, W,
                             cols2.data());
              detail::gemm_accum_bt(gslice.data(), cols2.data(),
                                    self.parents[1]->grad_buffer().data(), Kc,
                                    hw, Kdim);
            }
            if (need_in) {
              std::fill(tmp2.begin(), tmp2.end(), T(0));
              detail::gemm_accum(kt.data(), gslice.data(), tmp2.data(), Kdim,
                                 Kc, hw);
              detail::col2im_add(tmp2.data(), U, vhw, H, W, r, r, 1, pad, H,
                                 W,
                                 self.parents[0]->grad_buffer().data() +
                                     (int64_t(n) * U * V + vi) * hw);
            }
          }
        }
      });
}

}  // namespace latis
