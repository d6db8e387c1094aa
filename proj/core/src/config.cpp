#include "latis/model.hpp"

#include <json.hpp>

namespace latis {

namespace {

using nlohmann::json;

// Field table keeps to_json/from_json/validate in sync with one list.
json config_to_object(const ModelConfig& c) {
  json j;
  j["scale"] = c.scale;
  j["channels"] = c.channels;
  j["num_lgfb"] = c.num_lgfb;
  j["csconv_kernels"] = {c.csconv_kernel_small, c.csconv_kernel_large};
  j["shuffle_groups"] = c.shuffle_groups;
  j["qk_depth"] = c.qk_depth;
  j["value_depth"] = c.value_depth;
  j["heads"] = c.heads;
  j["kv_heads"] = c.kv_heads;
  j["lambda_conv_r"] = c.lambda_conv_r;
  j["cbam_reduction"] = c.cbam_reduction;
  j["cbam_spatial_kernel"] = c.cbam_spatial_kernel;
  j["layer_norm_eps"] = c.layer_norm_eps;
  j["layer_norm_per_position"] = c.layer_norm_per_position;
  j["use_channel_shuffle"] = c.use_channel_shuffle;
  j["use_cbam"] = c.use_cbam;
  j["use_layer_norm"] = c.use_layer_norm;
  j["use_bicubic_residual"] = c.use_bicubic_residual;
  return j;
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError(std::string("config field '") + key +
                      "' must be an integer");
  return v.get<int>();
}

bool get_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean())
    throw ConfigError(std::string("config field '") + key +
                      "' must be a boolean");
  return v.get<bool>();
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (scale < 2 || scale > 4) fail("scale must be 2, 3, or 4");
  if (channels < 2 || channels % 2 != 0)
    fail("channels must be even and positive (the local branch halves them)");
  if (num_lgfb < 1) fail("num_lgfb must be at least 1");
  if (csconv_kernel_small < 1 || csconv_kernel_small % 2 == 0 ||
      csconv_kernel_large < 1 || csconv_kernel_large % 2 == 0)
    fail("csconv kernel sizes must be odd and positive");
  if (shuffle_groups < 1 || channels % shuffle_groups != 0)
    fail("channels must be divisible by shuffle_groups");
  if (qk_depth < 1 || value_depth < 1 || heads < 1 || kv_heads < 1)
    fail("qk_depth, value_depth, heads, kv_heads must be positive");
  if (heads * value_depth != channels)
    fail("heads * value_depth must equal channels (" +
         std::to_string(heads) + " * " + std::to_string(value_depth) +
         " != " + std::to_string(channels) + ")");
  if (lambda_conv_r < 1 || lambda_conv_r % 2 == 0)
    fail("lambda_conv_r must be odd");
  if (cbam_reduction < 1 || channels % cbam_reduction != 0)
    fail("channels must be divisible by cbam_reduction");
  if (cbam_spatial_kernel < 1 || cbam_spatial_kernel % 2 == 0)
    fail("cbam_spatial_kernel must be odd");
  if (!(layer_norm_eps > 0)) fail("layer_norm_eps must be positive");
}

std::string ModelConfig::to_json() const {
  // nlohmann orders object keys lexicographically, so this is canonical.
  return config_to_object(*this).dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  static const char* known[] = {
      "scale",          "channels",        "num_lgfb",
      "csconv_kernels", "shuffle_groups",  "qk_depth",
      "value_depth",    "heads",           "kv_heads",
      "lambda_conv_r",  "cbam_reduction",  "cbam_spatial_kernel",
      "layer_norm_eps", "layer_norm_per_position",
      "use_channel_shuffle", "use_cbam",   "use_layer_norm",
      "use_bicubic_residual"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok |= it.key() == k;
    if (!ok) throw ConfigError("unknown config field '" + it.key() + "'");
  }

  ModelConfig c;
  c.scale = get_int(j, "scale", c.scale);
  c.channels = get_int(j, "channels", c.channels);
  c.num_lgfb = get_int(j, "num_lgfb", c.num_lgfb);
  if (j.contains("csconv_kernels")) {
    const json& ks = j.at("csconv_kernels");
    if (!ks.is_array() || ks.size() != 2 || !ks[0].is_number_integer() ||
        !ks[1].is_number_integer())
      throw ConfigError("csconv_kernels must be an array of two integers");
    c.csconv_kernel_small = ks[0].get<int>();
    c.csconv_kernel_large = ks[1].get<int>();
  }
  c.shuffle_groups = get_int(j, "shuffle_groups", c.shuffle_groups);
  c.qk_depth = get_int(j, "qk_depth", c.qk_depth);
  c.value_depth = get_int(j, "value_depth", c.value_depth);
  c.heads = get_int(j, "heads", c.heads);
  c.kv_heads = get_int(j, "kv_heads", c.kv_heads);
  c.lambda_conv_r = get_int(j, "lambda_conv_r", c.lambda_conv_r);
  c.cbam_reduction = get_int(j, "cbam_reduction", c.cbam_reduction);
  c.cbam_spatial_kernel = get_int(j, "cbam_spatial_kernel", c.cbam_spatial_kernel);
  if (j.contains("layer_norm_eps")) {
    const json& v = j.at("layer_norm_eps");
    if (!v.is_number()) throw ConfigError("layer_norm_eps must be a number");
    c.layer_norm_eps = v.get<double>();
  }
  c.layer_norm_per_position =
      get_bool(j, "layer_norm_per_position", c.layer_norm_per_position);
  c.use_channel_shuffle =
      get_bool(j, "use_channel_shuffle", c.use_channel_shuffle);
  c.use_cbam = get_bool(j, "use_cbam", c.use_cbam);
  c.use_layer_norm = get_bool(j, "use_layer_norm", c.use_layer_norm);
  c.use_bicubic_residual =
      get_bool(j, "use_bicubic_residual", c.use_bicubic_residual);
  c.validate();
  return c;
}

}  // namespace latis
