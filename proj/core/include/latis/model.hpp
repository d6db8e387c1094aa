// Network definition: local feature extraction (two serial convs, concat,
// channel shuffle), the lambda-abstraction global feature layer, CBAM
// refinement, and the pixel-shuffle reconstruction head with a bicubic
// residual. Parameter enumeration is the single source of truth shared by
// initialization, counting, checkpointing, and the optimizer.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "latis/contract.hpp"
#include "latis/conv.hpp"
#include "latis/image.hpp"
#include "latis/ops.hpp"
#include "latis/tensor.hpp"

namespace latis {

struct ModelConfig {
  int scale = 2;  // 2, 3, or 4
  int channels = 32;
  int num_lgfb = 3;
  int csconv_kernel_small = 3;
  int csconv_kernel_large = 7;
  int shuffle_groups = 4;
  int qk_depth = 16;   // per-head query/key depth k
  int value_depth = 8;  // per-head value depth v
  int heads = 4;        // query heads h; heads * value_depth == channels
  int kv_heads = 4;     // key/value heads u
  int lambda_conv_r = 25;  // spatial extent of the position-lambda kernel
  int cbam_reduction = 8;
  int cbam_spatial_kernel = 7;
  double layer_norm_eps = 1e-5;
  bool layer_norm_per_position = false;
  bool use_channel_shuffle = true;
  bool use_cbam = true;
  bool use_layer_norm = true;
  bool use_bicubic_residual = true;

  // Throws ConfigError on any violated structural constraint.
  void validate() const;
  // Canonical JSON (sorted keys, all fields explicit); stable across runs,
  // used for the checkpoint config hash.
  std::string to_json() const;
  // Starts from defaults, applies the given (possibly partial) JSON object,
  // rejects unknown keys. Validates before returning.
  static ModelConfig from_json(const std::string& text);
};

enum class ParamKind { conv_weight, conv_bias, norm_gamma, norm_beta };

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  ParamKind kind;
  int64_t fan_in;  // init bound for conv weights; unused for the others
};

// Every learnable tensor of the architecture, in a fixed deterministic
// order. Checkpoints, Adam state, counting, and init all walk this list.
std::vector<ParamSpec> enumerate_parameters(const ModelConfig& cfg);

struct ModelInfo {
  int64_t param_count = 0;
  // Multiply-accumulate count of the plain 2-D convolutions at an 80x64
  // input, the convention the architecture's size is quoted in.
  int64_t flops = 0;
  // 2 * MACs over every convolution (2-D and the position-lambda 3-D) and
  // every tensor contraction at the same input size.
  int64_t flops_full = 0;
};

ModelInfo model_info(const ModelConfig& cfg);

// Named parameter collection; iteration order is the enumeration order.
template <typename T>
class Parameters {
 public:
  void add(std::string name, Tensor<T> t) {
    for (const auto& it : items_)
      if (it.first == name)
        throw UsageError("duplicate parameter name: " + name);
    items_.emplace_back(std::move(name), std::move(t));
  }
  Tensor<T>& at(const std::string& name) {
    for (auto& it : items_)
      if (it.first == name) return it.second;
    throw UsageError("unknown parameter: " + name);
  }
  const Tensor<T>& at(const std::string& name) const {
    return const_cast<Parameters*>(this)->at(name);
  }
  bool contains(const std::string& name) const {
    for (const auto& it : items_)
      if (it.first == name) return true;
    return false;
  }
  std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& items() const {
    return items_;
  }
  size_t size() const { return items_.size(); }
  void zero_grad() {
    for (auto& it : items_) it.second.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
};

// Fresh parameters: Kaiming-uniform conv weights (bound sqrt(6/fan_in)),
// zero biases, unit/zero norm affine. Every element is a pure function of
// (seed, parameter index, element index).
template <typename T>
Parameters<T> init_parameters(const ModelConfig& cfg, uint64_t seed) {
  Parameters<T> params;
  const auto specs = enumerate_parameters(cfg);
  for (size_t pi = 0; pi < specs.size(); ++pi) {
    const ParamSpec& s = specs[pi];
    int64_t n = 1;
    for (int d : s.shape) n *= d;
    std::vector<T> data(n);
    switch (s.kind) {
      case ParamKind::conv_weight: {
        const T bound = T(std::sqrt(6.0 / double(s.fan_in)));
        for (int64_t i = 0; i < n; ++i) {
          const double u = rng_unit(rng_mix(seed, pi, uint64_t(i)));
          data[i] = T(2.0 * u - 1.0) * bound;
        }
        break;
      }
      case ParamKind::conv_bias:
      case ParamKind::norm_beta:
        break;  // zeros
      case ParamKind::norm_gamma:
        std::fill(data.begin(), data.end(), T(1));
        break;
    }
    params.add(s.name, Tensor<T>::from(s.shape, std::move(data), true));
  }
  return params;
}

// Local branch: F1 = SiLU(conv k1, C -> C/2) of the input,
// F2 = SiLU(conv k2, C/2 -> C/2) of F1, output = shuffle(concat(F1, F2)).
template <typename T>
Tensor<T> csconv_forward(const Tensor<T>& x, const Parameters<T>& p,
                         const std::string& prefix, const ModelConfig& cfg) {
  auto f1 = silu(conv2d(x, p.at(prefix + ".conv1.weight"),
                        p.at(prefix + ".conv1.bias")));
  auto f2 = silu(conv2d(f1, p.at(prefix + ".conv2.weight"),
                        p.at(prefix + ".conv2.bias")));
  auto cat = concat_channels(f1, f2);
  if (!cfg.use_channel_shuffle) return cat;
  return channel_shuffle(cat, cfg.shuffle_groups);
}

// Global branch. Pointwise projections produce per-head queries and
// softmax-normalized keys; the content lambda contracts keys with values
// over every position (and over the kv heads), the position lambda convolves
// values over a local window. Each query head applies both lambdas and the
// heads are re-interleaved into C channels.
template <typename T>
Tensor<T> gfe_forward(const Tensor<T>& x, const Parameters<T>& p,
                      const std::string& prefix, const ModelConfig& cfg) {
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int C = cfg.channels, k = cfg.qk_depth, v = cfg.value_depth;
  const int h = cfg.heads, u = cfg.kv_heads;
  check_shape(x.dim(1) == C, "gfe_forward: channel count mismatch");
  check_shape(h * v == C, "gfe_forward: heads * value_depth must equal C");
  const int n = H * W;

  Tensor<T> x0 = x;
  if (cfg.use_layer_norm)
    x0 = layer_norm(x, p.at(prefix + ".ln.gamma"), p.at(prefix + ".ln.beta"),
                    T(cfg.layer_norm_eps), cfg.layer_norm_per_position);

  // Channel orders: q is [head][k], kproj is [u][k], vproj is [u][v], so a
  // plain reshape splits the axes.
  auto q = conv2d(x0, p.at(prefix + ".q.weight"), p.at(prefix + ".q.bias"));
  auto kp = conv2d(x0, p.at(prefix + ".k.weight"), p.at(prefix + ".k.bias"));
  auto vp = conv2d(x0, p.at(prefix + ".v.weight"), p.at(prefix + ".v.bias"));
  auto Q = reshape(q, {N, h, k, n});
  auto K = softmax_axis(reshape(kp, {N, u, k, n}), 3);
  auto V = reshape(vp, {N, u, v, n});

  // Content lambda: positions and kv heads contracted away -> [N,k,v].
  auto lam_c = contract(K, V, "nukm,nuvm->nkv");
  // Position lambda: [N,k,v] at every site.
  auto lam_p = conv3d_lambda(reshape(vp, {N, u, v, H, W}),
                             p.at(prefix + ".lambda_conv.weight"),
                             p.at(prefix + ".lambda_conv.bias"));
  auto y_c = contract(Q, lam_c, "nhkm,nkv->nhvm");
  auto y_p = contract(Q, reshape(lam_p, {N, k, v, n}), "nhkm,nkvm->nhvm");
  return reshape(add(y_c, y_p), {N, C, H, W});
}

// Channel attention (shared two-layer MLP over average- and max-pooled
// descriptors) followed by spatial attention (k x k conv over the
// channel-mean and channel-max maps of the refined features).
template <typename T>
Tensor<T> cbam_forward(const Tensor<T>& x, const Parameters<T>& p,
                       const std::string& prefix, const ModelConfig& cfg) {
  if (!cfg.use_cbam) return x;
  auto mlp = [&](const Tensor<T>& pooled) {
    auto hmid = relu(conv2d(pooled, p.at(prefix + ".mlp1.weight"),
                            p.at(prefix + ".mlp1.bias")));
    return conv2d(hmid, p.at(prefix + ".mlp2.weight"),
                  p.at(prefix + ".mlp2.bias"));
  };
  auto gate_c = sigmoid(add(mlp(reduce(x, ReduceKind::mean_spatial)),
                            mlp(reduce(x, ReduceKind::max_spatial))));
  auto xc = mul_channel_gate(x, gate_c);
  auto maps = concat_channels(reduce(xc, ReduceKind::mean_channel),
                              reduce(xc, ReduceKind::max_channel));
  auto gate_s = sigmoid(conv2d(maps, p.at(prefix + ".spatial.weight"),
                               p.at(prefix + ".spatial.bias")));
  return mul_spatial_gate(xc, gate_s);
}

// One block: strictly sequential local -> global -> attention.
template <typename T>
Tensor<T> lgfb_forward(const Tensor<T>& x, const Parameters<T>& p,
                       const std::string& prefix, const ModelConfig& cfg) {
  auto local = csconv_forward(x, p, prefix + ".csconv", cfg);
  auto global = gfe_forward(local, p, prefix + ".gfe", cfg);
  return cbam_forward(global, p, prefix + ".cbam", cfg);
}

namespace detail {

// Bicubic upsample of each batch sample's single channel, as a constant
// (non-differentiable) tensor. Shares bicubic_resize with the metrics and
// data modules, so the residual path and the evaluation baseline agree
// exactly.
template <typename T>
Tensor<T> bicubic_residual(const Tensor<T>& lr, int s) {
  const int N = lr.dim(0), H = lr.dim(2), W = lr.dim(3);
  std::vector<T> out(int64_t(N) * s * H * s * W);
  ImageF img(H, W);
  for (int n = 0; n < N; ++n) {
    const T* src = lr.values().data() + int64_t(n) * H * W;
    for (int64_t i = 0; i < int64_t(H) * W; ++i)
      img.pixels[i] = float(src[i]);
    ImageF up = bicubic_resize(img, s * H, s * W);
    T* dst = out.data() + int64_t(n) * s * H * s * W;
    for (int64_t i = 0; i < up.numel(); ++i) dst[i] = T(up.pixels[i]);
  }
  return Tensor<T>::from({N, 1, s * H, s * W}, std::move(out));
}

}  // namespace detail

// Full network: shallow conv, num_lgfb blocks, pixel-shuffle reconstruction
// (two x2 stages for scale 4), final conv to one channel, bicubic residual.
template <typename T>
Tensor<T> latis_forward(const Tensor<T>& lr, const Parameters<T>& p,
                        const ModelConfig& cfg) {
  check_shape(lr.rank() == 4 && lr.dim(1) == 1,
              "latis_forward: input must be [N,1,H,W]");
  if (cfg.scale < 2 || cfg.scale > 4)
    throw ConfigError("latis_forward: scale must be 2, 3, or 4");
  auto x = conv2d(lr, p.at("shallow.weight"), p.at("shallow.bias"));
  for (int i = 0; i < cfg.num_lgfb; ++i)
    x = lgfb_forward(x, p, "lgfb" + std::to_string(i), cfg);
  if (cfg.scale == 4) {
    x = pixel_shuffle(conv2d(x, p.at("up1.weight"), p.at("up1.bias")), 2);
    x = pixel_shuffle(conv2d(x, p.at("up2.weight"), p.at("up2.bias")), 2);
  } else {
    x = pixel_shuffle(conv2d(x, p.at("up1.weight"), p.at("up1.bias")),
                      cfg.scale);
  }
  auto y = conv2d(x, p.at("final.weight"), p.at("final.bias"));
  if (!cfg.use_bicubic_residual) return y;
  return add(y, detail::bicubic_residual(lr, cfg.scale));
}

}  // namespace latis
