#include "latis/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace latis {

AdamState AdamState::init(const Parameters<float>& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& [name, p] : params.items()) {
    st.m.emplace_back(p.numel(), 0.f);
    st.v.emplace_back(p.numel(), 0.f);
  }
  return st;
}

void adam_step(Parameters<float>& params, AdamState& state,
               const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw UsageError("adam_step: optimizer state does not match parameters");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params.items()[i];
    if (!p.has_grad())
      throw UsageError("adam_step: missing gradient for parameter '" + name +
                       "'");
    const std::vector<float>& g = p.grad();
    std::vector<float>& val = p.mutable_values();
    std::vector<float>& m = state.m[i];
    std::vector<float>& v = state.v[i];
    for (size_t j = 0; j < val.size(); ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * double(m[j]) + (1.0 - cfg.beta1) * gj;
      const double vj =
          cfg.beta2 * double(v[j]) + (1.0 - cfg.beta2) * gj * gj;
      m[j] = float(mj);
      v[j] = float(vj);
      // Moments re-read as stored (float32) so a checkpointed resume
      // replays the identical arithmetic.
      const double mhat = double(m[j]) / bc1;
      const double vhat = double(v[j]) / bc2;
      val[j] = float(double(val[j]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

namespace {

constexpr uint32_t kCheckpointVersion = 1;

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8),
                        (unsigned char)(v >> 16), (unsigned char)(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
  out.write(reinterpret_cast<char*>(b), 8);
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
  // Raw IEEE-754 little-endian words (host is little-endian; asserted at
  // load via the magic/version path staying readable).
  out.write(reinterpret_cast<const char*>(v.data()),
            std::streamsize(v.size() * sizeof(float)));
}

struct Reader {
  std::ifstream in;
  std::string context = "checkpoint header";

  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw IoError("cannot open checkpoint " + path);
  }
  void read_raw(void* dst, size_t n) {
    in.read(reinterpret_cast<char*>(dst), std::streamsize(n));
    if (size_t(in.gcount()) != n)
      throw IoError("checkpoint truncated while reading " + context);
  }
  uint32_t u32() {
    unsigned char b[4];
    read_raw(b, 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
  }
  uint64_t u64() {
    unsigned char b[8];
    read_raw(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
  }
  std::vector<float> floats(size_t n) {
    std::vector<float> v(n);
    read_raw(v.data(), n * sizeof(float));
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write("LATC", 4);
  put_u32(out, kCheckpointVersion);
  const std::string cfg_json = ckpt.config.to_json();
  put_u32(out, uint32_t(cfg_json.size()));
  out.write(cfg_json.data(), std::streamsize(cfg_json.size()));
  put_u64(out, fnv1a(cfg_json));
  put_u32(out, uint32_t(ckpt.params.size()));
  for (const auto& [name, p] : ckpt.params.items()) {
    put_u32(out, uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put_u32(out, uint32_t(p.rank()));
    for (int d : p.shape()) put_u32(out, uint32_t(d));
    put_floats(out, p.values());
  }
  out.put(ckpt.has_adam ? 1 : 0);
  if (ckpt.has_adam) {
    if (ckpt.adam.m.size() != ckpt.params.size() ||
        ckpt.adam.v.size() != ckpt.params.size())
      throw UsageError("save_checkpoint: optimizer state size mismatch");
    put_u64(out, uint64_t(ckpt.adam.t));
    for (const auto& m : ckpt.adam.m) put_floats(out, m);
    for (const auto& v : ckpt.adam.v) put_floats(out, v);
  }
  put_u32(out, uint32_t(ckpt.epoch));
  put_u64(out, ckpt.seed);
  put_u64(out, uint64_t(ckpt.step));
  out.flush();
  if (!out) throw IoError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.read_raw(magic, 4);
  if (std::memcmp(magic, "LATC", 4) != 0)
    throw FormatError(path + ": not a checkpoint (bad magic)");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  r.context = "config block";
  const uint32_t cfg_len = r.u32();
  std::string cfg_json(cfg_len, '\0');
  r.read_raw(cfg_json.data(), cfg_len);
  const uint64_t stored_hash = r.u64();
  if (stored_hash != fnv1a(cfg_json))
    throw FormatError(path + ": config hash mismatch (corrupt checkpoint)");
  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json(cfg_json);

  const uint32_t count = r.u32();
  const auto specs = enumerate_parameters(ckpt.config);
  if (count != specs.size())
    throw FormatError(path + ": checkpoint holds " + std::to_string(count) +
                      " tensors, config implies " +
                      std::to_string(specs.size()));
  for (uint32_t i = 0; i < count; ++i) {
    r.context = "tensor name " + std::to_string(i);
    const uint32_t name_len = r.u32();
    if (name_len > 4096)
      throw FormatError(path + ": implausible tensor name length");
    std::string name(name_len, '\0');
    r.read_raw(name.data(), name_len);
    r.context = "tensor '" + name + "'";
    if (name != specs[i].name)
      throw FormatError(path + ": tensor '" + name + "' where '" +
                        specs[i].name + "' was expected");
    const uint32_t rank = r.u32();
    if (rank != specs[i].shape.size())
      throw FormatError(path + ": rank mismatch on '" + name + "'");
    std::vector<int> dims(rank);
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      dims[d] = int(r.u32());
      numel *= dims[d];
    }
    if (dims != specs[i].shape)
      throw FormatError(path + ": shape mismatch on '" + name + "'");
    auto values = r.floats(size_t(numel));
    ckpt.params.add(name,
                    Tensor<float>::from(dims, std::move(values), true));
  }
  r.context = "optimizer flag";
  unsigned char flag;
  r.read_raw(&flag, 1);
  ckpt.has_adam = flag != 0;
  if (ckpt.has_adam) {
    r.context = "optimizer step counter";
    ckpt.adam.t = int64_t(r.u64());
    for (const auto& [name, p] : ckpt.params.items()) {
      r.context = "optimizer m for '" + name + "'";
      ckpt.adam.m.push_back(r.floats(size_t(p.numel())));
    }
    for (const auto& [name, p] : ckpt.params.items()) {
      r.context = "optimizer v for '" + name + "'";
      ckpt.adam.v.push_back(r.floats(size_t(p.numel())));
    }
  }
  r.context = "trailer";
  ckpt.epoch = int(r.u32());
  ckpt.seed = r.u64();
  ckpt.step = int64_t(r.u64());
  return ckpt;
}

namespace {

// Re-run one step's forward with per-op finite checks to name the first op
// that produced a NaN/Inf.
[[noreturn]] void diagnose_divergence(const Tensor<float>& lr,
                                      const Tensor<float>& hr,
                                      const Parameters<float>& params,
                                      const ModelConfig& config, int epoch,
                                      const FitOptions& opt) {
  const std::string where =
      " (epoch " + std::to_string(epoch) + ")";
  set_finite_checks(true);
  try {
    auto pred = latis_forward(lr, params, config);
    (void)combined_loss(pred, hr, epoch, opt.schedule, opt.hist);
  } catch (const DivergenceError& e) {
    set_finite_checks(false);
    throw DivergenceError(std::string(e.what()) + where);
  }
  set_finite_checks(false);
  throw DivergenceError("loss is non-finite" + where);
}

}  // namespace

Checkpoint fit(const Dataset& ds, const ModelConfig& config,
               const FitOptions& opt, const Checkpoint* resume) {
  config.validate();
  Checkpoint ckpt;
  if (resume) {
    if (resume->config.to_json() != config.to_json())
      throw ConfigError("resume checkpoint config differs from requested");
    if (!resume->has_adam)
      throw UsageError("resume checkpoint lacks optimizer state");
    ckpt = *resume;
  } else {
    ckpt.config = config;
    ckpt.params = init_parameters<float>(config, opt.seed);
    ckpt.adam = AdamState::init(ckpt.params);
    ckpt.seed = opt.seed;
  }
  ckpt.has_adam = true;

  char line[160];
  for (int epoch = ckpt.epoch; epoch < opt.epochs; ++epoch) {
    for (int i = 0; i < opt.steps_per_epoch; ++i) {
      const int64_t gstep = int64_t(epoch) * opt.steps_per_epoch + i;
      Batch batch = sample_batch(ds, opt.batch, gstep);
      auto pred = latis_forward(batch.lr, ckpt.params, config);
      auto parts = combined_loss(pred, batch.hr, epoch, opt.schedule, opt.hist);
      const float total = parts.total.item();
      if (!std::isfinite(total))
        diagnose_divergence(batch.lr, batch.hr, ckpt.params, config, epoch,
                            opt);
      ckpt.params.zero_grad();
      parts.total.backward();
      adam_step(ckpt.params, ckpt.adam, opt.adam);
      ckpt.step = gstep + 1;
      if (opt.log_line) {
        if (parts.histogram_active)
          std::snprintf(line, sizeof(line), "%d,%d,%.9g,%.9g,%.9g", epoch, i,
                        double(parts.content.item()),
                        double(parts.histogram.item()), opt.adam.lr);
        else
          std::snprintf(line, sizeof(line), "%d,%d,%.9g,skipped,%.9g", epoch,
                        i, double(parts.content.item()), opt.adam.lr);
        opt.log_line(line);
      }
    }
    ckpt.epoch = epoch + 1;
  }
  return ckpt;
}

}  // namespace latis
