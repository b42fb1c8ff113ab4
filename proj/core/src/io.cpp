#include "mvharm/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mvharm {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

Image load_image(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("load_image: cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail("load_image: not a PNG file: " + path);
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("load_image: libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("load_image: libpng init failure");
  }
  std::vector<std::vector<png_byte>> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("load_image: PNG decode error in " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);
  if (w == 0 || h == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("load_image: zero-dimension image: " + path);
  }

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  if (bit_depth != 8 && bit_depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("load_image: unsupported bit depth in " + path);
  }
  size_t rowbytes = png_get_rowbytes(png, info);
  rows.assign(h, std::vector<png_byte>(rowbytes));
  std::vector<png_bytep> row_ptrs(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = rows[y].data();
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(h), static_cast<int>(w));
  if (bit_depth == 8) {
    for (png_uint_32 y = 0; y < h; ++y) {
      const png_byte* row = rows[y].data();
      for (png_uint_32 x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          img.at(y, x, c) = row[x * 3 + c] / 255.0;
        }
      }
    }
  } else {
    for (png_uint_32 y = 0; y < h; ++y) {
      const png_byte* row = rows[y].data();
      for (png_uint_32 x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          // PNG stores 16-bit samples big-endian.
          unsigned v = (unsigned(row[(x * 3 + c) * 2]) << 8) | row[(x * 3 + c) * 2 + 1];
          img.at(y, x, c) = v / 65535.0;
        }
      }
    }
  }
  return img;
}

void save_image(const Image& img, const std::string& path) {
  if (img.height <= 0 || img.width <= 0) fail("save_image: empty image");
  for (double v : img.data) {
    if (!std::isfinite(v)) fail("save_image: non-finite pixel value");
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("save_image: cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("save_image: libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("save_image: libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("save_image: PNG encode error for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
        row[size_t(x) * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

SequenceManifest parse_manifest(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("manifest: invalid JSON: ") + e.what());
  }
  SequenceManifest m;
  m.scene_id = j.at("scene").get<std::string>();
  m.reference_index = j.at("reference").get<int>();
  m.frame_paths = j.at("frames").get<std::vector<std::string>>();
  if (j.contains("ground_truth")) {
    m.ground_truth_paths = j.at("ground_truth").get<std::vector<std::string>>();
  }
  validate_manifest(m);
  return m;
}

std::string serialize_manifest(const SequenceManifest& m) {
  validate_manifest(m);
  nlohmann::json j;
  j["scene"] = m.scene_id;
  j["reference"] = m.reference_index;
  j["frames"] = m.frame_paths;
  if (!m.ground_truth_paths.empty()) j["ground_truth"] = m.ground_truth_paths;
  return j.dump(2) + "\n";
}

SequenceManifest load_manifest(const std::string& path) {
  return parse_manifest(read_file_bytes(path));
}

void save_manifest(const SequenceManifest& m, const std::string& path) {
  write_file_bytes(path, serialize_manifest(m));
}

namespace {

constexpr char kGridMagic[4] = {'B', 'G', 'R', 'D'};
constexpr uint32_t kGridVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

uint32_t get_u32(const std::string& s, size_t off) {
  return uint32_t(uint8_t(s[off])) | (uint32_t(uint8_t(s[off + 1])) << 8) |
         (uint32_t(uint8_t(s[off + 2])) << 16) | (uint32_t(uint8_t(s[off + 3])) << 24);
}

void write_grid_raw(const float* data, int h_s, int w_s, int d, int p,
                    const std::string& path) {
  if (h_s <= 0 || w_s <= 0 || d <= 0) fail("write_grid: non-positive dims");
  std::string out;
  size_t count = size_t(h_s) * w_s * d * p;
  out.reserve(24 + count * 4);
  out.append(kGridMagic, 4);
  put_u32(out, kGridVersion);
  put_u32(out, uint32_t(h_s));
  put_u32(out, uint32_t(w_s));
  put_u32(out, uint32_t(d));
  put_u32(out, uint32_t(p));
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    put_u32(out, bits);
  }
  write_file_bytes(path, out);
}

void read_grid_raw(const std::string& path, int expected_p, int* h_s, int* w_s,
                   int* d, std::vector<float>* data) {
  std::string s = read_file_bytes(path);
  if (s.size() < 24) fail("read_grid: truncated header in " + path);
  if (std::memcmp(s.data(), kGridMagic, 4) != 0) fail("read_grid: magic mismatch in " + path);
  uint32_t version = get_u32(s, 4);
  if (version != kGridVersion) fail("read_grid: unsupported version in " + path);
  uint32_t hs = get_u32(s, 8), ws = get_u32(s, 12), dd = get_u32(s, 16), p = get_u32(s, 20);
  if (hs == 0 || ws == 0 || dd == 0) fail("read_grid: zero dims in " + path);
  if (int(p) != expected_p) fail("read_grid: unexpected parameter count in " + path);
  size_t count = size_t(hs) * ws * dd * p;
  if (s.size() != 24 + count * 4) fail("read_grid: truncated payload in " + path);
  data->resize(count);
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits = get_u32(s, 24 + i * 4);
    std::memcpy(&(*data)[i], &bits, 4);
  }
  *h_s = int(hs);
  *w_s = int(ws);
  *d = int(dd);
}

}  // namespace

void write_grid(const BilateralGrid& grid, const std::string& path) {
  write_grid_raw(grid.params.data(), grid.h_s, grid.w_s, grid.d, 12, path);
}

void write_grid(const ConfidenceGrid& grid, const std::string& path) {
  write_grid_raw(grid.values.data(), grid.h_s, grid.w_s, grid.d, 1, path);
}

BilateralGrid read_bilateral_grid(const std::string& path) {
  BilateralGrid g;
  read_grid_raw(path, 12, &g.h_s, &g.w_s, &g.d, &g.params);
  return g;
}

ConfidenceGrid read_confidence_grid(const std::string& path) {
  ConfidenceGrid g;
  read_grid_raw(path, 1, &g.h_s, &g.w_s, &g.d, &g.values);
  return g;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("cannot open file for writing: " + path);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) fail("write failed: " + path);
}

}  // namespace mvharm
