// Op semantics against independent oracles: convolutions and contractions
// against exhaustive index loops, the rearrangement ops against their index
// laws, reductions and activations against direct arithmetic. Tolerances are
// float-level (1e-6 relative) because training runs in 32-bit.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "latis/common.hpp"
#include "latis/contract.hpp"
#include "latis/conv.hpp"
#include "latis/ops.hpp"
#include "latis/tensor.hpp"

using namespace latis;

namespace {

Tensor<float> randf(std::vector<int> shape, uint64_t stream,
                    float lo = -1.f, float hi = 1.f) {
  Tensor<float> t = Tensor<float>::zeros(std::move(shape));
  auto& v = t.mutable_values();
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = lo + (hi - lo) * float(rng_unit(rng_mix(0xABCDEFULL, stream, i)));
  return t;
}

// Plain seven-loop convolution in double, plus the per-output sum of
// absolute terms. The implementation accumulates in float, so a fair
// tolerance is relative to that magnitude budget, not to the (possibly
// cancelled) result.
struct ConvOracle {
  std::vector<float> y;
  std::vector<double> absum;
};

ConvOracle conv2d_loops(const Tensor<float>& x, const Tensor<float>& w,
                        const std::vector<float>& bias, int stride, int pad) {
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
  const int Ho = (H + 2 * pad - Kh) / stride + 1;
  const int Wo = (W + 2 * pad - Kw) / stride + 1;
  ConvOracle o;
  o.y.assign(size_t(N) * Co * Ho * Wo, 0.f);
  o.absum.assign(o.y.size(), 0.0);
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          double mag = std::fabs(acc);
          for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < Kh; ++ky)
              for (int kx = 0; kx < Kw; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                const double t =
                    double(x.values()[((size_t(n) * Ci + ci) * H + iy) * W + ix]) *
                    double(w.values()[((size_t(co) * Ci + ci) * Kh + ky) * Kw + kx]);
                acc += t;
                mag += std::fabs(t);
              }
          const size_t i = ((size_t(n) * Co + co) * Ho + oy) * Wo + ox;
          o.y[i] = float(acc);
          o.absum[i] = mag;
        }
  return o;
}

void check_conv(const std::vector<float>& got, const ConvOracle& want,
                double tol = 1e-6) {
  REQUIRE(got.size() == want.y.size());
  for (size_t i = 0; i < got.size(); ++i)
    CHECK(std::fabs(double(got[i]) - double(want.y[i])) <=
          tol * std::max(1.0, want.absum[i]));
}

void check_close(const std::vector<float>& got, const std::vector<float>& want,
                 float tol = 1e-6f) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    const float denom = std::max({std::fabs(want[i]), std::fabs(got[i]), 1.f});
    CHECK(std::fabs(got[i] - want[i]) / denom < tol);
  }
}

}  // namespace

TEST_CASE("conv2d matches the direct-loop oracle") {
  struct Case { std::vector<int> xs, ws; int stride, pad; };
  const Case cases[] = {
      {{2, 3, 8, 8}, {4, 3, 3, 3}, 1, 1},
      {{1, 1, 5, 7}, {2, 1, 1, 1}, 1, 0},
      {{1, 2, 8, 6}, {3, 2, 5, 5}, 1, 2},
      {{2, 2, 8, 8}, {2, 2, 3, 3}, 2, 1},
      {{1, 4, 7, 7}, {4, 4, 7, 7}, 1, 3},
  };
  int stream = 100;
  for (const Case& c : cases) {
    CAPTURE(c.stride);
    Tensor<float> x = randf(c.xs, stream++);
    Tensor<float> w = randf(c.ws, stream++);
    Tensor<float> b = randf({c.ws[0]}, stream++);
    Tensor<float> y = conv2d(x, w, b, c.stride, c.pad);
    check_conv(y.values(), conv2d_loops(x, w, b.values(), c.stride, c.pad));
  }
}

TEST_CASE("conv2d same-padding default centers odd kernels") {
  Tensor<float> x = randf({1, 2, 6, 5}, 200);
  Tensor<float> w = randf({3, 2, 5, 5}, 201);
  Tensor<float> y = conv2d(x, w);  // no bias, pad = (k-1)/2
  REQUIRE(y.shape() == std::vector<int>{1, 3, 6, 5});
  check_conv(y.values(), conv2d_loops(x, w, {}, 1, 2));
}

TEST_CASE("conv2d rejects malformed shapes") {
  Tensor<float> x = randf({1, 2, 4, 4}, 210);
  CHECK_THROWS_AS(conv2d(x, randf({3, 1, 3, 3}, 211)), ShapeError);
  CHECK_THROWS_AS(conv2d(x, randf({3, 2, 2, 2}, 212)), ShapeError);  // even k, same pad
  CHECK_THROWS_AS(conv2d(x, randf({3, 2, 3, 3}, 213), randf({4}, 214)),
                  ShapeError);
  CHECK_THROWS_AS(conv2d(randf({2, 4}, 215), randf({3, 2, 3, 3}, 216)),
                  ShapeError);
}

TEST_CASE("conv3d_lambda matches per-slice 2-D convolution loops") {
  const int N = 2, U = 3, V = 2, H = 6, W = 5, K = 4, R = 5;
  Tensor<float> x = randf({N, U, V, H, W}, 220);
  Tensor<float> w = randf({K, U, 1, R, R}, 221);
  Tensor<float> b = randf({K}, 222);
  Tensor<float> y = conv3d_lambda(x, w, b);
  REQUIRE(y.shape() == std::vector<int>{N, K, V, H, W});
  const int P = R / 2;
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int v = 0; v < V; ++v)
        for (int oy = 0; oy < H; ++oy)
          for (int ox = 0; ox < W; ++ox) {
            double acc = b.values()[k];
            for (int u = 0; u < U; ++u)
              for (int ry = 0; ry < R; ++ry)
                for (int rx = 0; rx < R; ++rx) {
                  const int iy = oy + ry - P, ix = ox + rx - P;
                  if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                  acc += double(x.values()[(((size_t(n) * U + u) * V + v) * H + iy) * W + ix]) *
                         double(w.values()[((size_t(k) * U + u) * R + ry) * R + rx]);
                }
            const float got =
                y.values()[(((size_t(n) * K + k) * V + v) * H + oy) * W + ox];
            const float want = float(acc);
            CHECK(std::fabs(got - want) <=
                  1e-6f * std::max({std::fabs(want), std::fabs(got), 1.f}));
          }
}

TEST_CASE("conv3d_lambda validates its kernel") {
  Tensor<float> x = randf({1, 2, 2, 4, 4}, 230);
  CHECK_THROWS_AS(conv3d_lambda(x, randf({3, 2, 2, 3, 3}, 231)), ShapeError);
  CHECK_THROWS_AS(conv3d_lambda(x, randf({3, 2, 1, 3, 5}, 232)), ShapeError);
  CHECK_THROWS_AS(conv3d_lambda(x, randf({3, 2, 1, 4, 4}, 233)), ShapeError);
  CHECK_THROWS_AS(conv3d_lambda(x, randf({3, 1, 1, 3, 3}, 234)), ShapeError);
}

TEST_CASE("contract matches exhaustive index loops") {
  // Batched matrix product.
  {
    Tensor<float> a = randf({3, 4, 5}, 240);
    Tensor<float> b = randf({3, 5, 2}, 241);
    Tensor<float> y = contract(a, b, "bij,bjk->bik");
    for (int bb = 0; bb < 3; ++bb)
      for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 2; ++k) {
          double acc = 0;
          for (int j = 0; j < 5; ++j)
            acc += double(a.values()[(size_t(bb) * 4 + i) * 5 + j]) *
                   double(b.values()[(size_t(bb) * 5 + j) * 2 + k]);
          CHECK(y.values()[(size_t(bb) * 4 + i) * 2 + k] ==
                doctest::Approx(acc).epsilon(1e-5));
        }
  }
  // The attention patterns: shared kv-head axis contracted with positions.
  {
    const int n = 2, u = 2, k = 3, v = 2, m = 6;
    Tensor<float> K = randf({n, u, k, m}, 242);
    Tensor<float> V = randf({n, u, v, m}, 243);
    Tensor<float> y = contract(K, V, "nukm,nuvm->nkv");
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < k; ++c)
        for (int d = 0; d < v; ++d) {
          double acc = 0;
          for (int b = 0; b < u; ++b)
            for (int e = 0; e < m; ++e)
              acc += double(K.values()[((size_t(a) * u + b) * k + c) * m + e]) *
                     double(V.values()[((size_t(a) * u + b) * v + d) * m + e]);
          CHECK(y.values()[(size_t(a) * k + c) * v + d] ==
                doctest::Approx(acc).epsilon(1e-5));
        }
  }
  // Scalar output (full contraction).
  {
    Tensor<float> a = randf({4, 3}, 244);
    Tensor<float> b = randf({4, 3}, 245);
    double acc = 0;
    for (size_t i = 0; i < a.values().size(); ++i)
      acc += double(a.values()[i]) * double(b.values()[i]);
    CHECK(contract(a, b, "ij,ij->").item() ==
          doctest::Approx(acc).epsilon(1e-5));
  }
}

TEST_CASE("contract rejects malformed subscripts") {
  Tensor<float> a = randf({2, 3}, 250);
  Tensor<float> b = randf({3, 4}, 251);
  CHECK_THROWS_AS(contract(a, b, "ij jk ik"), UsageError);
  CHECK_THROWS_AS(contract(a, b, "iI,Ik->ik"), UsageError);
  CHECK_THROWS_AS(contract(a, b, "iij,jk->ik"), UsageError);
  CHECK_THROWS_AS(contract(a, b, "ij,jk->ikz"), ShapeError);  // z unbound
  CHECK_THROWS_AS(contract(a, b, "ij,kl->ik"), UsageError);   // j dropped one-sided
  CHECK_THROWS_AS(contract(a, randf({4, 5}, 252), "ij,jk->ik"), ShapeError);
  CHECK_THROWS_AS(contract(a, b, "ijk,jk->i"), ShapeError);   // rank mismatch
  // Outer products are legitimate: no contracted axes at all.
  Tensor<float> op = contract(randf({2}, 253), randf({3}, 254), "i,j->ij");
  CHECK(op.shape() == std::vector<int>{2, 3});
}

TEST_CASE("activations match direct formulas") {
  Tensor<float> x = randf({3, 7}, 260, -4.f, 4.f);
  auto sig = sigmoid(x), si = silu(x), re = relu(x);
  Tensor<float> c = randf({3, 7}, 261, -0.5f, 1.5f);
  auto cl = clamp01(c);
  for (size_t i = 0; i < x.values().size(); ++i) {
    const double v = x.values()[i];
    const double s = 1.0 / (1.0 + std::exp(-v));
    CHECK(sig.values()[i] == doctest::Approx(s).epsilon(1e-6));
    CHECK(si.values()[i] == doctest::Approx(v * s).epsilon(1e-6));
    CHECK(re.values()[i] == float(v > 0 ? v : 0));
    const float cv = c.values()[i];
    CHECK(cl.values()[i] == std::min(1.f, std::max(0.f, cv)));
  }
}

TEST_CASE("binary elementwise ops and the kind dispatcher") {
  Tensor<float> a = randf({2, 5}, 270);
  Tensor<float> b = randf({2, 5}, 271);
  auto s = add(a, b), d = sub(a, b), m = mul(a, b), sc = scale(a, 2.5f);
  for (size_t i = 0; i < a.values().size(); ++i) {
    CHECK(s.values()[i] == a.values()[i] + b.values()[i]);
    CHECK(d.values()[i] == a.values()[i] - b.values()[i]);
    CHECK(m.values()[i] == a.values()[i] * b.values()[i]);
    CHECK(sc.values()[i] == 2.5f * a.values()[i]);
  }
  CHECK(elementwise(ElementwiseKind::silu, a).values() == silu(a).values());
  CHECK(elementwise(ElementwiseKind::mul, a, b).values() == m.values());
  CHECK_THROWS_AS(elementwise(ElementwiseKind::add, a), UsageError);
  CHECK_THROWS_AS(elementwise(ElementwiseKind::silu, a, b), UsageError);
  CHECK_THROWS_AS(elementwise(ElementwiseKind::scale, a, b), UsageError);
  CHECK_THROWS_AS(add(a, randf({5, 2}, 272)), ShapeError);
}

TEST_CASE("softmax normalizes fibers and is shift invariant") {
  Tensor<float> x = randf({2, 3, 4, 5}, 280, -3.f, 3.f);
  for (int axis = 0; axis < 4; ++axis) {
    Tensor<float> y = softmax_axis(x, axis);
    // Sum over the axis must be 1 for every fiber.
    const auto& sh = x.shape();
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= sh[i];
    for (int i = axis + 1; i < 4; ++i) inner *= sh[i];
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < inner; ++in) {
        double sum = 0;
        for (int j = 0; j < sh[axis]; ++j)
          sum += y.values()[(o * sh[axis] + j) * inner + in];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
      }
  }
  Tensor<float> shifted = add(x, Tensor<float>::filled(x.shape(), 7.5f));
  check_close(softmax_axis(shifted, 3).values(), softmax_axis(x, 3).values(),
              1e-5f);
  CHECK_THROWS_AS(softmax_axis(x, 4), ShapeError);
  CHECK_THROWS_AS(softmax_axis(x, -1), ShapeError);
}

TEST_CASE("layer_norm standardizes each group before the affine") {
  Tensor<float> x = randf({2, 3, 4, 4}, 290, -2.f, 5.f);
  Tensor<float> gamma = Tensor<float>::filled({3}, 1.f);
  Tensor<float> beta = Tensor<float>::zeros({3});

  auto stats = [](const std::vector<float>& v, int64_t lo, int64_t stride,
                  int64_t count, int64_t inner) {
    double mean = 0;
    for (int64_t i = 0; i < count; ++i)
      for (int64_t j = 0; j < inner; ++j) mean += v[lo + i * stride + j];
    mean /= double(count * inner);
    double var = 0;
    for (int64_t i = 0; i < count; ++i)
      for (int64_t j = 0; j < inner; ++j) {
        const double d = v[lo + i * stride + j] - mean;
        var += d * d;
      }
    return std::pair<double, double>(mean, var / double(count * inner));
  };

  SUBCASE("per sample over channels and space") {
    Tensor<float> y = layer_norm(x, gamma, beta);
    for (int n = 0; n < 2; ++n) {
      auto [m, var] = stats(y.values(), int64_t(n) * 3 * 16, 1, 1, 3 * 16);
      CHECK(m == doctest::Approx(0.0).epsilon(1e-5));
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  SUBCASE("per position over channels") {
    Tensor<float> y = layer_norm(x, gamma, beta, 1e-5f, true);
    for (int n = 0; n < 2; ++n)
      for (int p = 0; p < 16; ++p) {
        auto [m, var] = stats(y.values(), int64_t(n) * 48 + p, 16, 3, 1);
        CHECK(m == doctest::Approx(0.0).epsilon(1e-4));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-2));
      }
  }
  SUBCASE("affine applies per channel") {
    Tensor<float> g2 = Tensor<float>::from({3}, {2.f, 3.f, 4.f});
    Tensor<float> b2 = Tensor<float>::from({3}, {-1.f, 0.f, 1.f});
    Tensor<float> base = layer_norm(x, gamma, beta);
    Tensor<float> aff = layer_norm(x, g2, b2);
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 16; ++i) {
          const size_t idx = (size_t(n) * 3 + c) * 16 + i;
          CHECK(aff.values()[idx] ==
                doctest::Approx(base.values()[idx] * g2.values()[c] +
                                b2.values()[c])
                    .epsilon(1e-5));
        }
  }
}

TEST_CASE("channel_shuffle obeys its index law and inverts") {
  const int N = 2, C = 12, H = 3, W = 2, g = 3;
  Tensor<float> x = randf({N, C, H, W}, 300);
  Tensor<float> y = channel_shuffle(x, g);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H * W; ++i) {
        const int oc = (c % g) * (C / g) + c / g;
        CHECK(y.values()[(size_t(n) * C + oc) * H * W + i] ==
              x.values()[(size_t(n) * C + c) * H * W + i]);
      }
  // Shuffling by g then by C/g returns to the original order.
  Tensor<float> back = channel_shuffle(y, C / g);
  CHECK(back.values() == x.values());
  CHECK_THROWS_AS(channel_shuffle(x, 5), ShapeError);
}

TEST_CASE("pixel_shuffle obeys its index law") {
  const int N = 2, C = 2, s = 3, H = 2, W = 3;
  Tensor<float> x = randf({N, C * s * s, H, W}, 310);
  Tensor<float> y = pixel_shuffle(x, s);
  REQUIRE(y.shape() == std::vector<int>{N, C, H * s, W * s});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
          for (int dy = 0; dy < s; ++dy)
            for (int dx = 0; dx < s; ++dx) {
              const float in =
                  x.values()[((size_t(n) * C * s * s + c * s * s + dy * s + dx) * H + h) * W + w];
              const float out =
                  y.values()[((size_t(n) * C + c) * (H * s) + s * h + dy) * (W * s) + s * w + dx];
              CHECK(in == out);
            }
  CHECK_THROWS_AS(pixel_shuffle(randf({1, 7, 2, 2}, 311), 2), ShapeError);
}

TEST_CASE("reductions match loop results") {
  Tensor<float> x = randf({2, 3, 4, 5}, 320, -2.f, 2.f);
  const auto& v = x.values();
  double total = 0;
  for (float f : v) total += f;
  CHECK(reduce(x, ReduceKind::sum).item() ==
        doctest::Approx(total).epsilon(1e-5));
  CHECK(reduce(x, ReduceKind::mean).item() ==
        doctest::Approx(total / double(v.size())).epsilon(1e-5));

  Tensor<float> ms = reduce(x, ReduceKind::mean_spatial);
  Tensor<float> xs = reduce(x, ReduceKind::max_spatial);
  REQUIRE(ms.shape() == std::vector<int>{2, 3, 1, 1});
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double sum = 0;
      float mx = -1e30f;
      for (int i = 0; i < 20; ++i) {
        const float f = v[(size_t(n) * 3 + c) * 20 + i];
        sum += f;
        mx = std::max(mx, f);
      }
      CHECK(ms.values()[n * 3 + c] == doctest::Approx(sum / 20).epsilon(1e-5));
      CHECK(xs.values()[n * 3 + c] == mx);
    }

  Tensor<float> mc = reduce(x, ReduceKind::mean_channel);
  Tensor<float> xc = reduce(x, ReduceKind::max_channel);
  REQUIRE(mc.shape() == std::vector<int>{2, 1, 4, 5});
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 20; ++i) {
      double sum = 0;
      float mx = -1e30f;
      for (int c = 0; c < 3; ++c) {
        const float f = v[(size_t(n) * 3 + c) * 20 + i];
        sum += f;
        mx = std::max(mx, f);
      }
      CHECK(mc.values()[n * 20 + i] == doctest::Approx(sum / 3).epsilon(1e-5));
      CHECK(xc.values()[n * 20 + i] == mx);
    }
}

TEST_CASE("reshape, concat, and gates") {
  Tensor<float> a = randf({2, 3, 2, 2}, 330);
  Tensor<float> r = reshape(a, {6, 4});
  CHECK(r.values() == a.values());
  CHECK_THROWS_AS(reshape(a, {5, 5}), ShapeError);

  Tensor<float> b = randf({2, 2, 2, 2}, 331);
  Tensor<float> cat = concat_channels(a, b);
  REQUIRE(cat.shape() == std::vector<int>{2, 5, 2, 2});
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i)
        CHECK(cat.values()[(size_t(n) * 5 + c) * 4 + i] ==
              a.values()[(size_t(n) * 3 + c) * 4 + i]);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 4; ++i)
        CHECK(cat.values()[(size_t(n) * 5 + 3 + c) * 4 + i] ==
              b.values()[(size_t(n) * 2 + c) * 4 + i]);
  }
  CHECK_THROWS_AS(concat_channels(a, randf({1, 2, 2, 2}, 332)), ShapeError);

  Tensor<float> cg = randf({2, 3, 1, 1}, 333, 0.f, 1.f);
  Tensor<float> gated = mul_channel_gate(a, cg);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i)
        CHECK(gated.values()[(size_t(n) * 3 + c) * 4 + i] ==
              a.values()[(size_t(n) * 3 + c) * 4 + i] * cg.values()[n * 3 + c]);

  Tensor<float> sg = randf({2, 1, 2, 2}, 334, 0.f, 1.f);
  Tensor<float> sgated = mul_spatial_gate(a, sg);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i)
        CHECK(sgated.values()[(size_t(n) * 3 + c) * 4 + i] ==
              a.values()[(size_t(n) * 3 + c) * 4 + i] * sg.values()[n * 4 + i]);
}

TEST_CASE("autodiff bookkeeping") {
  SUBCASE("leaf gradients accumulate across separate graphs") {
    Tensor<float> x = Tensor<float>::from({2}, {3.f, -2.f}, true);
    reduce(mul(x, x), ReduceKind::sum).backward();
    CHECK(x.grad()[0] == doctest::Approx(6.f));
    reduce(mul(x, x), ReduceKind::sum).backward();
    CHECK(x.grad()[0] == doctest::Approx(12.f));
    x.zero_grad();
    CHECK(!x.has_grad());
    reduce(mul(x, x), ReduceKind::sum).backward();
    CHECK(x.grad()[0] == doctest::Approx(6.f));
    CHECK(x.grad()[1] == doctest::Approx(-4.f));
  }
  SUBCASE("a leaf without requires_grad stays grad-free") {
    Tensor<float> x = Tensor<float>::from({2}, {1.f, 2.f});
    Tensor<float> y = Tensor<float>::from({2}, {3.f, 4.f}, true);
    reduce(mul(x, y), ReduceKind::sum).backward();
    CHECK(!x.has_grad());
    CHECK(y.has_grad());
  }
  SUBCASE("backward demands a scalar") {
    Tensor<float> x = Tensor<float>::from({2}, {1.f, 2.f}, true);
    CHECK_THROWS_AS(mul(x, x).backward(), UsageError);
  }
  SUBCASE("item demands a single element") {
    CHECK_THROWS_AS(Tensor<float>::zeros({2}).item(), ShapeError);
  }
  SUBCASE("shared subgraphs accumulate through both consumers") {
    Tensor<float> x = Tensor<float>::from({1}, {2.f}, true);
    Tensor<float> m = mul(x, x);            // x^2
    Tensor<float> loss = add(m, mul(m, x)); // x^2 + x^3 -> d/dx = 2x + 3x^2
    reduce(loss, ReduceKind::sum).backward();
    CHECK(x.grad()[0] == doctest::Approx(16.f));
  }
}

TEST_CASE("finite checks name the offending op") {
  set_finite_checks(true);
  Tensor<float> big = Tensor<float>::filled({2}, 3e38f, true);
  CHECK_THROWS_AS(add(big, big), DivergenceError);
  try {
    add(big, big);
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("add") != std::string::npos);
  }
  set_finite_checks(false);
  CHECK_NOTHROW(add(big, big));
}

TEST_CASE("tensor factories validate shapes") {
  CHECK_THROWS_AS(Tensor<float>::zeros({}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>::zeros({0, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>::from({2, 2}, {1.f}), ShapeError);
  Tensor<float> s = Tensor<float>::scalar(4.f);
  CHECK(s.item() == 4.f);
  CHECK(s.numel() == 1);
}
