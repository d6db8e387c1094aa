// Command line front end: train / sr / eval / gradcheck / info.
// Machine-readable CSV goes to stdout, progress text to stderr.
// Exit codes: 0 ok, 1 usage or data error, 2 flag parse error,
// 3 numeric divergence during training, 4 gradient check failure.
#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latis/common.hpp"
#include "latis/dataio.hpp"
#include "latis/gradcheck.hpp"
#include "latis/image.hpp"
#include "latis/model.hpp"
#include "latis/train.hpp"

namespace {

using namespace latis;

Tensor<float> image_tensor(const ImageF& img) {
  Tensor<float> t = Tensor<float>::zeros({1, 1, img.height, img.width});
  std::copy(img.pixels.begin(), img.pixels.end(),
            t.mutable_values().begin());
  return t;
}

ImageF tensor_image(const Tensor<float>& t) {
  ImageF img(t.dim(2), t.dim(3));
  const auto& v = t.values();
  for (int64_t i = 0; i < img.numel(); ++i)
    img.pixels[i] = std::min(1.0f, std::max(0.0f, v[i]));
  return img;
}

ImageF shave_border(const ImageF& img, int k) {
  if (k <= 0) return img;
  if (img.height <= 2 * k || img.width <= 2 * k)
    throw UsageError("--shave " + std::to_string(k) +
                     " leaves no pixels on a " + std::to_string(img.height) +
                     "x" + std::to_string(img.width) + " image");
  ImageF out(img.height - 2 * k, img.width - 2 * k);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = img.at(y + k, x + k);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Architecture flags shared by train and info. Only flags the user actually
// passed override the config file; the file overrides built-in defaults.
struct ArchFlags {
  std::string config_path;
  int scale = 0;
  int num_lgfb = 0;
  bool no_shuffle = false;
  bool no_cbam = false;
  bool no_layernorm = false;
  bool no_residual = false;

  CLI::Option* scale_opt = nullptr;
  CLI::Option* num_lgfb_opt = nullptr;

  void attach(CLI::App* cmd, bool scale_required) {
    cmd->add_option("--config", config_path,
                    "JSON file overriding architecture defaults");
    scale_opt = cmd->add_option("--scale", scale, "Upscaling factor")
                    ->check(CLI::Range(2, 4));
    if (scale_required) scale_opt->required();
    num_lgfb_opt =
        cmd->add_option("--num-lgfb", num_lgfb, "Number of feature blocks")
            ->check(CLI::PositiveNumber);
    cmd->add_flag("--no-shuffle", no_shuffle,
                  "Concatenate without channel shuffle");
    cmd->add_flag("--no-cbam", no_cbam, "Drop the attention refinement");
    cmd->add_flag("--no-layernorm", no_layernorm,
                  "Drop the pre-attention normalization");
    cmd->add_flag("--no-residual", no_residual,
                  "Drop the bicubic skip connection");
  }

  ModelConfig build() const {
    ModelConfig cfg = config_path.empty()
                          ? ModelConfig{}
                          : ModelConfig::from_json(read_file(config_path));
    if (scale_opt->count()) cfg.scale = scale;
    if (num_lgfb_opt->count()) cfg.num_lgfb = num_lgfb;
    if (no_shuffle) cfg.use_channel_shuffle = false;
    if (no_cbam) cfg.use_cbam = false;
    if (no_layernorm) cfg.use_layer_norm = false;
    if (no_residual) cfg.use_bicubic_residual = false;
    cfg.validate();
    return cfg;
  }
};

int cmd_train(const ArchFlags& arch, const std::string& data,
              const std::string& out, const std::string& resume_path,
              FitOptions opt, bool batch_set, bool crop_set, int crop,
              double lambda_p, bool no_emd) {
  ModelConfig cfg = arch.build();
  if (!batch_set) {
    opt.batch = cfg.scale == 2 ? 64 : (cfg.scale == 3 ? 48 : 32);
  }
  if (!crop_set) {
    crop = cfg.scale == 2 ? 64 : (cfg.scale == 3 ? 96 : 128);
  }
  opt.schedule.lambda_weight = no_emd ? 0.0 : lambda_p;

  Dataset ds(data, cfg.scale, crop, opt.seed);
  std::fprintf(stderr, "training on %zu images, batch %d, %d epochs x %d steps\n",
               ds.size(), opt.batch, opt.epochs, opt.steps_per_epoch);
  opt.log_line = [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  };

  Checkpoint start;
  const Checkpoint* resume = nullptr;
  if (!resume_path.empty()) {
    start = load_checkpoint(resume_path);
    resume = &start;
  }
  Checkpoint done = fit(ds, cfg, opt, resume);
  save_checkpoint(out, done);
  std::fprintf(stderr, "saved %s\n", out.c_str());
  return 0;
}

int cmd_sr(const std::string& model, const std::string& input,
           const std::string& output) {
  Checkpoint ckpt = load_checkpoint(model);
  ImageF in = load_image(input);
  Tensor<float> pred =
      latis_forward(image_tensor(in), ckpt.params, ckpt.config);
  save_image(output, tensor_image(pred));
  std::fprintf(stderr, "%s: %dx%d -> %dx%d\n", output.c_str(), in.height,
               in.width, in.height * ckpt.config.scale,
               in.width * ckpt.config.scale);
  return 0;
}

int cmd_eval(const std::string& model, const std::string& hr_source,
             int scale, const std::string& baseline, int shave) {
  Checkpoint ckpt;
  const bool use_model = baseline.empty();
  if (use_model) {
    ckpt = load_checkpoint(model);
    if (ckpt.config.scale != scale)
      throw UsageError("checkpoint is x" +
                       std::to_string(ckpt.config.scale) +
                       " but --scale is " + std::to_string(scale));
  } else if (baseline != "bicubic") {
    throw UsageError("unknown baseline: " + baseline);
  }

  Dataset ds(hr_source, scale, /*crop=*/0, /*seed=*/0);
  std::printf("file,psnr_db,ssim\n");
  double sum_psnr = 0.0, sum_ssim = 0.0;
  for (size_t i = 0; i < ds.size(); ++i) {
    const auto& [lr, hr] = ds.pair(i);
    ImageF pred;
    if (use_model) {
      pred = tensor_image(
          latis_forward(image_tensor(lr), ckpt.params, ckpt.config));
    } else {
      pred = bicubic_resize(lr, hr.height, hr.width);
    }
    const ImageF a = shave_border(pred, shave);
    const ImageF b = shave_border(hr, shave);
    const double p = psnr(a, b), s = ssim(a, b);
    const std::string name =
        std::filesystem::path(ds.paths()[i]).filename().string();
    std::printf("%s,%.4f,%.6f\n", name.c_str(), p, s);
    sum_psnr += p;
    sum_ssim += s;
  }
  std::printf("mean,%.4f,%.6f\n", sum_psnr / double(ds.size()),
              sum_ssim / double(ds.size()));
  return 0;
}

int cmd_gradcheck(const std::string& op) {
  std::vector<GradCheckResult> results = run_gradcheck_suite(op);
  if (results.empty())
    throw UsageError("no gradient check matches --op " + op);
  std::printf("op,max_rel_error,threshold,status\n");
  std::vector<std::string> failed;
  for (const auto& r : results) {
    std::printf("%s,%.3e,%.0e,%s\n", r.name.c_str(), r.max_error,
                r.threshold, r.pass ? "pass" : "FAIL");
    if (!r.pass) failed.push_back(r.name);
  }
  if (!failed.empty()) {
    std::fprintf(stderr, "gradient check failed:");
    for (const auto& n : failed) std::fprintf(stderr, " %s", n.c_str());
    std::fprintf(stderr, "\n");
    return 4;
  }
  return 0;
}

int cmd_info(const ArchFlags& arch, const std::string& model) {
  ModelConfig cfg;
  if (!model.empty()) {
    cfg = load_checkpoint(model).config;
  } else {
    if (!arch.scale_opt->count())
      throw UsageError("info needs --scale or --model");
    cfg = arch.build();
  }
  const ModelInfo info = model_info(cfg);
  std::printf("params,%" PRId64 "\n", info.param_count);
  std::printf("flops,%" PRId64 "\n", info.flops);
  std::printf("flops_full,%" PRId64 "\n", info.flops_full);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LATIS thermal-image super-resolution"};
  app.require_subcommand(1);

  // train
  CLI::App* train = app.add_subcommand("train", "Train a model");
  std::string data, out = "latis.ckpt", resume_path;
  FitOptions opt;
  int crop = 0;
  double lambda_p = 0.125;
  bool no_emd = false;
  ArchFlags train_arch;
  train->add_option("--data", data, "HR image directory or manifest file")
      ->required();
  train_arch.attach(train, /*scale_required=*/true);
  train->add_option("--out", out, "Checkpoint output path");
  train->add_option("--epochs", opt.epochs, "Training epochs")
      ->check(CLI::PositiveNumber);
  CLI::Option* batch_opt =
      train->add_option("--batch", opt.batch, "Batch size (default 64/48/32 by scale)")
          ->check(CLI::PositiveNumber);
  train->add_option("--lr", opt.adam.lr, "Adam learning rate");
  train->add_option("--seed", opt.seed, "Run seed");
  train->add_option("--steps-per-epoch", opt.steps_per_epoch, "Steps per epoch")
      ->check(CLI::PositiveNumber);
  CLI::Option* crop_opt =
      train->add_option("--crop", crop,
                        "HR crop size, 0 = whole images (default 64/96/128 by scale)")
          ->check(CLI::NonNegativeNumber);
  train->add_option("--lambda-p", lambda_p, "Histogram loss weight");
  train->add_option("--n-epochs", opt.schedule.cutoff_epoch,
                    "Epochs before the histogram term switches off");
  train->add_flag("--no-emd", no_emd, "Train with the content loss only");
  train->add_option("--resume", resume_path, "Continue from a checkpoint");

  // sr
  CLI::App* sr = app.add_subcommand("sr", "Super-resolve one image");
  std::string sr_model, sr_input, sr_output;
  sr->add_option("--model", sr_model, "Checkpoint")->required();
  sr->add_option("--input", sr_input, "Input image (PGM or PNG)")->required();
  sr->add_option("--output", sr_output, "Output image path")->required();

  // eval
  CLI::App* eval = app.add_subcommand("eval", "PSNR/SSIM over a directory");
  std::string eval_model, eval_hr, eval_baseline;
  int eval_scale = 0, eval_shave = 0;
  eval->add_option("--model", eval_model, "Checkpoint");
  eval->add_option("--hr", eval_hr, "HR image directory or manifest")
      ->required();
  eval->add_option("--scale", eval_scale, "Upscaling factor")
      ->check(CLI::Range(2, 4))
      ->required();
  eval->add_option("--baseline", eval_baseline,
                   "Evaluate a model-free baseline (bicubic)");
  eval->add_option("--shave", eval_shave,
                   "Border pixels to ignore in the metrics")
      ->check(CLI::NonNegativeNumber);

  // gradcheck
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  std::string gc_op;
  gradcheck->add_option("--op", gc_op, "Only checks whose name contains this");

  // info
  CLI::App* info = app.add_subcommand("info", "Parameter and FLOP counts");
  std::string info_model;
  ArchFlags info_arch;
  info->add_option("--model", info_model, "Read the architecture from a checkpoint");
  info_arch.attach(info, /*scale_required=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*train)
      return cmd_train(train_arch, data, out, resume_path, opt,
                       batch_opt->count() > 0, crop_opt->count() > 0, crop,
                       lambda_p, no_emd);
    if (*sr) return cmd_sr(sr_model, sr_input, sr_output);
    if (*eval) {
      if (eval_baseline.empty() && eval_model.empty())
        throw UsageError("eval needs --model or --baseline bicubic");
      return cmd_eval(eval_model, eval_hr, eval_scale, eval_baseline,
                      eval_shave);
    }
    if (*gradcheck) return cmd_gradcheck(gc_op);
    if (*info) return cmd_info(info_arch, info_model);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
