#include "latis/dataio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "latis/common.hpp"

namespace latis {

namespace {

// ---- PGM ----

// Next header token, skipping whitespace and '#' comment lines.
std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(char(c));
  }
  if (tok.empty())
    throw IoError("truncated PGM header in " + path);
  return tok;
}

int pgm_int(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = pgm_token(in, path);
  try {
    size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad PGM " + std::string(what) + " '" + tok + "' in " +
                      path);
  }
}

ImageF load_pgm(std::ifstream& in, const std::string& path) {
  // "P5" was already consumed by the magic sniff; header continues with
  // width, height, maxval, then one whitespace byte before the samples.
  const int w = pgm_int(in, path, "width");
  const int h = pgm_int(in, path, "height");
  const int maxval = pgm_int(in, path, "maxval");
  if (w < 1 || h < 1)
    throw FormatError("PGM dimensions must be positive in " + path);
  if (maxval < 1 || maxval > 65535)
    throw FormatError("PGM maxval " + std::to_string(maxval) +
                      " out of range in " + path);
  const int bytes = maxval > 255 ? 2 : 1;
  ImageF img(h, w);
  std::vector<unsigned char> raw(size_t(w) * h * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (size_t(in.gcount()) != raw.size())
    throw IoError("truncated PGM pixel data in " + path);
  // Correctly rounded k/maxval, the same grid the PNG path lands on.
  const float fmax = float(maxval);
  if (bytes == 1) {
    for (int64_t i = 0; i < img.numel(); ++i)
      img.pixels[i] = float(raw[i]) / fmax;
  } else {
    // Big-endian two-byte samples per the format.
    for (int64_t i = 0; i < img.numel(); ++i)
      img.pixels[i] = float((raw[2 * i] << 8) | raw[2 * i + 1]) / fmax;
  }
  return img;
}

void save_pgm(const std::string& path, const ImageF& img, int bit_depth) {
  const int maxval = bit_depth == 16 ? 65535 : 255;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  std::vector<unsigned char> raw(img.numel() * (bit_depth == 16 ? 2 : 1));
  for (int64_t i = 0; i < img.numel(); ++i) {
    const long q = std::lround(double(img.pixels[i]) * maxval);
    const int v = int(std::clamp(q, 0l, long(maxval)));
    if (bit_depth == 16) {
      raw[2 * i] = (unsigned char)(v >> 8);
      raw[2 * i + 1] = (unsigned char)(v & 0xff);
    } else {
      raw[i] = (unsigned char)v;
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!out) throw IoError("short write to " + path);
}

// ---- PNG ----

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* f = nullptr;
  ~PngReadGuard() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (f) fclose(f);
  }
};

ImageF load_png(const std::string& path) {
  PngReadGuard g;
  g.f = fopen(path.c_str(), "rb");
  if (!g.f) throw IoError("cannot open " + path);
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  if (!g.png) throw IoError("libpng init failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(g.png)))
    throw FormatError("corrupt or truncated PNG: " + path);
  png_init_io(g.png, g.f);
  png_read_info(g.png, g.info);

  const png_uint_32 w = png_get_image_width(g.png, g.info);
  const png_uint_32 h = png_get_image_height(g.png, g.info);
  const int color = png_get_color_type(g.png, g.info);
  int depth = png_get_bit_depth(g.png, g.info);
  if (color != PNG_COLOR_TYPE_GRAY)
    throw FormatError(path + ": PNG must be grayscale without alpha");
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(g.png);
    depth = 8;
  }
  png_set_interlace_handling(g.png);
  png_read_update_info(g.png, g.info);

  const int bytes = depth == 16 ? 2 : 1;
  std::vector<unsigned char> raw(size_t(w) * h * bytes);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = raw.data() + size_t(y) * w * bytes;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);

  ImageF img{int(h), int(w)};
  if (bytes == 1) {
    for (int64_t i = 0; i < img.numel(); ++i)
      img.pixels[i] = float(raw[i]) / 255.0f;
  } else {
    // PNG streams 16-bit samples big-endian.
    for (int64_t i = 0; i < img.numel(); ++i)
      img.pixels[i] = float((raw[2 * i] << 8) | raw[2 * i + 1]) / 65535.0f;
  }
  return img;
}

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* f = nullptr;
  ~PngWriteGuard() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (f) fclose(f);
  }
};

void save_png(const std::string& path, const ImageF& img, int bit_depth) {
  PngWriteGuard g;
  g.f = fopen(path.c_str(), "wb");
  if (!g.f) throw IoError("cannot open " + path + " for writing");
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                  nullptr);
  if (!g.png) throw IoError("libpng init failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(g.png))) throw IoError("PNG write failed: " + path);
  png_init_io(g.png, g.f);
  png_set_IHDR(g.png, g.info, img.width, img.height, bit_depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(g.png, g.info);

  const int maxval = bit_depth == 16 ? 65535 : 255;
  const int bytes = bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> row(size_t(img.width) * bytes);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const long q = std::lround(double(img.at(y, x)) * maxval);
      const int v = int(std::clamp(q, 0l, long(maxval)));
      if (bytes == 2) {
        row[2 * x] = (unsigned char)(v >> 8);
        row[2 * x + 1] = (unsigned char)(v & 0xff);
      } else {
        row[x] = (unsigned char)v;
      }
    }
    png_write_row(g.png, row.data());
  }
  png_write_end(g.png, nullptr);
}

bool has_suffix(const std::string& s, const char* suf) {
  const size_t n = std::strlen(suf);
  if (s.size() < n) return false;
  for (size_t i = 0; i < n; ++i)
    if (std::tolower(s[s.size() - n + i]) != suf[i]) return false;
  return true;
}

}  // namespace

ImageF load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  unsigned char magic[8] = {0};
  in.read(reinterpret_cast<char*>(magic), 8);
  const size_t got = size_t(in.gcount());
  if (got >= 2 && magic[0] == 'P' && magic[1] == '5') {
    in.clear();
    in.seekg(2);
    return load_pgm(in, path);
  }
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G',
                                           '\r', '\n', 0x1a, '\n'};
  if (got == 8 && std::memcmp(magic, png_sig, 8) == 0) {
    in.close();
    return load_png(path);
  }
  char hex[64];
  int off = 0;
  for (size_t i = 0; i < got && i < 8; ++i)
    off += std::snprintf(hex + off, sizeof(hex) - off, "%s%02x", i ? " " : "",
                         magic[i]);
  throw FormatError(path + ": unsupported image format (magic bytes: " + hex +
                    "); expected binary PGM (P5) or grayscale PNG");
}

void save_image(const std::string& path, const ImageF& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw UsageError("save_image: bit depth must be 8 or 16");
  if (img.height < 1 || img.width < 1)
    throw ShapeError("save_image: empty image");
  if (has_suffix(path, ".pgm") || has_suffix(path, ".pnm"))
    save_pgm(path, img, bit_depth);
  else if (has_suffix(path, ".png"))
    save_png(path, img, bit_depth);
  else
    throw FormatError("save_image: unknown extension on " + path +
                      " (use .pgm or .png)");
}

std::pair<ImageF, ImageF> make_pair(const ImageF& hr, int s) {
  if (s < 2 || s > 4) throw ConfigError("make_pair: scale must be 2, 3, or 4");
  const int hc = hr.height - hr.height % s;
  const int wc = hr.width - hr.width % s;
  if (hc < s || wc < s)
    throw ShapeError("make_pair: image " + std::to_string(hr.height) + "x" +
                     std::to_string(hr.width) + " smaller than scale " +
                     std::to_string(s));
  ImageF cropped(hc, wc);
  for (int y = 0; y < hc; ++y)
    for (int x = 0; x < wc; ++x) cropped.at(y, x) = hr.at(y, x);
  ImageF lr = bicubic_resize(cropped, hc / s, wc / s);
  return {std::move(lr), std::move(cropped)};
}

Dataset::Dataset(const std::string& source, int scale, int crop,
                 uint64_t seed)
    : scale_(scale), crop_(crop), seed_(seed) {
  if (scale < 2 || scale > 4)
    throw ConfigError("dataset scale must be 2, 3, or 4");
  if (crop < 0) throw ConfigError("crop must be non-negative");
  if (crop > 0 && (crop % 8 != 0 || crop % scale != 0))
    throw ConfigError("crop " + std::to_string(crop) +
                      " must be a multiple of 8 and of the scale");
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(source, ec)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      if (!entry.is_regular_file()) continue;
      const std::string p = entry.path().string();
      if (has_suffix(p, ".pgm") || has_suffix(p, ".pnm") ||
          has_suffix(p, ".png"))
        paths_.push_back(p);
    }
    std::sort(paths_.begin(), paths_.end());
  } else if (fs::is_regular_file(source, ec)) {
    std::ifstream in(source);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
        line.pop_back();
      if (!line.empty()) paths_.push_back(line);
    }
  } else {
    throw IoError("dataset source not found: " + source);
  }
  if (paths_.empty())
    throw UsageError("dataset is empty: no .pgm/.pnm/.png images in " +
                     source);
  cache_.resize(paths_.size());
}

const std::pair<ImageF, ImageF>& Dataset::pair(size_t index) const {
  if (!cache_[index]) {
    ImageF hr = load_image(paths_[index]);
    auto pr = make_pair(hr, scale_);
    if (crop_ > 0 &&
        (pr.second.height < crop_ || pr.second.width < crop_))
      throw ConfigError("crop " + std::to_string(crop_) + " exceeds image " +
                        paths_[index] + " (" +
                        std::to_string(pr.second.height) + "x" +
                        std::to_string(pr.second.width) + " after alignment)");
    cache_[index] =
        std::make_unique<std::pair<ImageF, ImageF>>(std::move(pr));
  }
  return *cache_[index];
}

Batch sample_batch(const Dataset& ds, int batch, int64_t step) {
  if (batch < 1) throw UsageError("batch size must be positive");
  const int s = ds.scale();
  // Window sizes; with crop 0 every image must share the first one's size.
  int wh = 0, ww = 0;
  if (ds.crop() > 0) {
    wh = ww = ds.crop();
  } else {
    const auto& first = ds.pair(0);
    wh = first.second.height;
    ww = first.second.width;
    if (wh % 8 != 0 || ww % 8 != 0)
      throw ConfigError(
          "whole-image training needs dimensions divisible by 8, got " +
          std::to_string(wh) + "x" + std::to_string(ww));
  }
  const int lh = wh / s, lw = ww / s;
  std::vector<float> lr_data(int64_t(batch) * lh * lw);
  std::vector<float> hr_data(int64_t(batch) * wh * ww);
  for (int i = 0; i < batch; ++i) {
    const uint64_t d = uint64_t(step) * batch + i;
    const size_t img = size_t(rng_mix(ds.seed(), 0, d) % ds.size());
    const auto& [lr, hr] = ds.pair(img);
    if (ds.crop() == 0 && (hr.height != wh || hr.width != ww))
      throw ConfigError("whole-image training needs uniform sizes; " +
                        ds.paths()[img] + " differs from the first image");
    const int max_oy = lr.height - lh, max_ox = lr.width - lw;
    const int oy = max_oy > 0 ? int(rng_mix(ds.seed(), 1, d) % (max_oy + 1)) : 0;
    const int ox = max_ox > 0 ? int(rng_mix(ds.seed(), 2, d) % (max_ox + 1)) : 0;
    float* ld = lr_data.data() + int64_t(i) * lh * lw;
    for (int y = 0; y < lh; ++y)
      for (int x = 0; x < lw; ++x)
        ld[int64_t(y) * lw + x] = lr.at(oy + y, ox + x);
    float* hd = hr_data.data() + int64_t(i) * wh * ww;
    for (int y = 0; y < wh; ++y)
      for (int x = 0; x < ww; ++x)
        hd[int64_t(y) * ww + x] = hr.at(s * oy + y, s * ox + x);
  }
  Batch b;
  b.lr = Tensor<float>::from({batch, 1, lh, lw}, std::move(lr_data));
  b.hr = Tensor<float>::from({batch, 1, wh, ww}, std::move(hr_data));
  return b;
}

}  // namespace latis
