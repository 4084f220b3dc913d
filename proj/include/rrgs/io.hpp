#pragma once

#include <string>
#include <vector>

#include "rrgs/image.hpp"
#include "rrgs/motion_models.hpp"

namespace rrgs {

/// 8-bit RGB PNG with fixed encoder settings (filter 0, zlib level 6), so
/// identical images produce identical bytes. Values are clamped to [0,1] and
/// rounded.
void write_png(const std::string& path, const Image& image);

/// Raw float32 RGB, row-major, little-endian. Exact up to the
/// double->float narrowing.
void write_raw_float(const std::string& path, const Image& image);
Image read_raw_float(const std::string& path, int width, int height);

/// Model checkpoints: "RRGS1" magic, little-endian u32 JSON header length,
/// JSON header, raw float32 payload.
void save_checkpoint(const std::string& path, const MotionModel& model);
MotionModel load_checkpoint(const std::string& path);

/// Binary little-endian PLY with float x, y, z vertices.
void write_ply_points(const std::string& path, const std::vector<Vec3>& points);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);
std::vector<unsigned char> read_file_bytes(const std::string& path);

}  // namespace rrgs
