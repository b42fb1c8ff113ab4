#pragma once

#include <string>

#include "mvharm/grid.hpp"
#include "mvharm/image.hpp"

namespace mvharm {

// Reads an 8- or 16-bit PNG. Values are divided by the sample-type maximum
// (255 or 65535); grayscale is replicated to three channels, alpha dropped.
Image load_image(const std::string& path);

// Clamps to [0,1], quantizes with round(v*255) and writes an 8-bit RGB PNG.
void save_image(const Image& img, const std::string& path);

SequenceManifest parse_manifest(const std::string& json_text);
std::string serialize_manifest(const SequenceManifest& m);
SequenceManifest load_manifest(const std::string& path);
void save_manifest(const SequenceManifest& m, const std::string& path);

// Binary grid container:
//   magic "BGRD" | u32 version=1 | u32 h_s, w_s, d, p (p is 12 or 1)
//   | h_s*w_s*d*p little-endian f32, row-major in (h_s, w_s, d, p) order.
// Round trips are bit-exact.
void write_grid(const BilateralGrid& grid, const std::string& path);
void write_grid(const ConfidenceGrid& grid, const std::string& path);
BilateralGrid read_bilateral_grid(const std::string& path);
ConfidenceGrid read_confidence_grid(const std::string& path);

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::string& bytes);

}  // namespace mvharm
