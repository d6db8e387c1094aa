#include "latis/model.hpp"

namespace latis {

std::vector<ParamSpec> enumerate_parameters(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> out;
  auto conv = [&](const std::string& name, int cout, int cin, int kh,
                  int kw) {
    out.push_back({name + ".weight",
                   {cout, cin, kh, kw},
                   ParamKind::conv_weight,
                   int64_t(cin) * kh * kw});
    out.push_back({name + ".bias", {cout}, ParamKind::conv_bias, 0});
  };
  const int C = cfg.channels;
  conv("shallow", C, 1, 3, 3);
  for (int i = 0; i < cfg.num_lgfb; ++i) {
    const std::string b = "lgfb" + std::to_string(i);
    conv(b + ".csconv.conv1", C / 2, C, cfg.csconv_kernel_small,
         cfg.csconv_kernel_small);
    conv(b + ".csconv.conv2", C / 2, C / 2, cfg.csconv_kernel_large,
         cfg.csconv_kernel_large);
    if (cfg.use_layer_norm) {
      out.push_back({b + ".gfe.ln.gamma", {C}, ParamKind::norm_gamma, 0});
      out.push_back({b + ".gfe.ln.beta", {C}, ParamKind::norm_beta, 0});
    }
    conv(b + ".gfe.q", cfg.heads * cfg.qk_depth, C, 1, 1);
    conv(b + ".gfe.k", cfg.kv_heads * cfg.qk_depth, C, 1, 1);
    conv(b + ".gfe.v", cfg.kv_heads * cfg.value_depth, C, 1, 1);
    const int r = cfg.lambda_conv_r;
    out.push_back({b + ".gfe.lambda_conv.weight",
                   {cfg.qk_depth, cfg.kv_heads, 1, r, r},
                   ParamKind::conv_weight,
                   int64_t(cfg.kv_heads) * r * r});
    out.push_back(
        {b + ".gfe.lambda_conv.bias", {cfg.qk_depth}, ParamKind::conv_bias, 0});
    if (cfg.use_cbam) {
      conv(b + ".cbam.mlp1", C / cfg.cbam_reduction, C, 1, 1);
      conv(b + ".cbam.mlp2", C, C / cfg.cbam_reduction, 1, 1);
      conv(b + ".cbam.spatial", 1, 2, cfg.cbam_spatial_kernel,
           cfg.cbam_spatial_kernel);
    }
  }
  if (cfg.scale == 4) {
    conv("up1", 4 * C, C, 1, 1);
    conv("up2", 4 * C, C, 1, 1);
  } else {
    conv("up1", cfg.scale * cfg.scale * C, C, 1, 1);
  }
  conv("final", 1, C, 3, 3);
  return out;
}

ModelInfo model_info(const ModelConfig& cfg) {
  cfg.validate();
  ModelInfo info;
  for (const ParamSpec& s : enumerate_parameters(cfg)) {
    int64_t n = 1;
    for (int d : s.shape) n *= d;
    info.param_count += n;
  }

  // Reference input for the quoted compute figures.
  const int64_t pos = 80 * 64;
  const int C = cfg.channels;
  const int64_t k1 = cfg.csconv_kernel_small, k2 = cfg.csconv_kernel_large;
  const int64_t kq = cfg.qk_depth, kv = cfg.value_depth;
  const int64_t h = cfg.heads, u = cfg.kv_heads, r = cfg.lambda_conv_r;

  int64_t macs2d = int64_t(C) * 1 * 9 * pos;  // shallow
  int64_t lambda_macs = 0;                     // 3-D conv + contractions
  for (int i = 0; i < cfg.num_lgfb; ++i) {
    macs2d += (C / 2) * int64_t(C) * k1 * k1 * pos;
    macs2d += (C / 2) * int64_t(C / 2) * k2 * k2 * pos;
    macs2d += h * kq * int64_t(C) * pos;  // q projection
    macs2d += u * kq * int64_t(C) * pos;  // k projection
    macs2d += u * kv * int64_t(C) * pos;  // v projection
    if (cfg.use_cbam) {
      const int64_t mid = C / cfg.cbam_reduction;
      macs2d += 2 * (int64_t(C) * mid + mid * int64_t(C));
      macs2d += int64_t(cfg.cbam_spatial_kernel) * cfg.cbam_spatial_kernel *
                2 * pos;
    }
    lambda_macs += kq * u * r * r * kv * pos;  // position-lambda 3-D conv
    lambda_macs += kq * kv * u * pos;          // content lambda
    lambda_macs += h * kq * kv * pos;          // apply content lambda
    lambda_macs += h * kq * kv * pos;          // apply position lambda
  }
  if (cfg.scale == 4) {
    macs2d += 4 * int64_t(C) * C * pos;
    macs2d += 4 * int64_t(C) * C * (4 * pos);
    macs2d += int64_t(C) * 9 * (16 * pos);
  } else {
    const int64_t s2 = int64_t(cfg.scale) * cfg.scale;
    macs2d += s2 * int64_t(C) * C * pos;
    macs2d += int64_t(C) * 9 * (s2 * pos);
  }
  info.flops = macs2d;
  info.flops_full = 2 * (macs2d + lambda_macs);
  return info;
}

}  // namespace latis
