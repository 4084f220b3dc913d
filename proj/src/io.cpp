#include "rrgs/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace rrgs {

namespace {

using nlohmann::json;

void append_u32_be(std::vector<unsigned char>& buf, uint32_t v) {
    buf.push_back((v >> 24) & 0xff);
    buf.push_back((v >> 16) & 0xff);
    buf.push_back((v >> 8) & 0xff);
    buf.push_back(v & 0xff);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& data) {
    append_u32_be(out, uint32_t(data.size()));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, uInt(4 + data.size()));
    append_u32_be(out, uint32_t(crc));
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::binary) {
    std::ofstream f(path, mode);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

}  // namespace

void write_png(const std::string& path, const Image& image) {
    const int w = image.width, h = image.height;
    std::vector<unsigned char> raw;
    raw.reserve(size_t(h) * (1 + size_t(w) * 3));
    for (int r = 0; r < h; ++r) {
        raw.push_back(0);  // filter: none
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                const double v = std::clamp(image.at(r, c, ch), 0.0, 1.0);
                raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
            }
    }

    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png deflate failed");
    compressed.resize(bound);

    std::vector<unsigned char> out = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<unsigned char> ihdr;
    append_u32_be(ihdr, uint32_t(w));
    append_u32_be(ihdr, uint32_t(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});

    auto f = open_out(path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
}

void write_raw_float(const std::string& path, const Image& image) {
    std::vector<float> buf(image.data.size());
    for (size_t i = 0; i < image.data.size(); ++i) buf[i] = float(image.data[i]);
    auto f = open_out(path);
    f.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size() * sizeof(float)));
}

Image read_raw_float(const std::string& path, int width, int height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    Image img(width, height);
    std::vector<float> buf(img.data.size());
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    if (!f) throw std::runtime_error("raw image file too short: " + path);
    for (size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i];
    return img;
}

namespace {

void append_floats(std::vector<float>& payload, const std::vector<Vec3>& v) {
    for (const auto& x : v) {
        payload.push_back(float(x[0]));
        payload.push_back(float(x[1]));
        payload.push_back(float(x[2]));
    }
}

void append_floats(std::vector<float>& payload, const std::vector<Vec4>& v) {
    for (const auto& x : v)
        for (int k = 0; k < 4; ++k) payload.push_back(float(x[k]));
}

void append_floats(std::vector<float>& payload, const std::vector<double>& v) {
    for (double x : v) payload.push_back(float(x));
}

size_t take_floats(const std::vector<float>& payload, size_t at, std::vector<Vec3>& v, size_t n) {
    v.resize(n);
    for (size_t i = 0; i < n; ++i) {
        v[i] = Vec3(payload.at(at), payload.at(at + 1), payload.at(at + 2));
        at += 3;
    }
    return at;
}

size_t take_floats(const std::vector<float>& payload, size_t at, std::vector<Vec4>& v, size_t n) {
    v.resize(n);
    for (size_t i = 0; i < n; ++i) {
        v[i] = Vec4(payload.at(at), payload.at(at + 1), payload.at(at + 2), payload.at(at + 3));
        at += 4;
    }
    return at;
}

size_t take_floats(const std::vector<float>& payload, size_t at, std::vector<double>& v,
                   size_t n) {
    v.resize(n);
    for (size_t i = 0; i < n; ++i) v[i] = payload.at(at++);
    return at;
}

constexpr char kMagic[5] = {'R', 'R', 'G', 'S', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const MotionModel& model) {
    json header;
    std::vector<float> payload;
    if (const auto* table = std::get_if<DeformationTable>(&model)) {
        header["model"] = "table";
        header["count"] = table->count;
        header["keys"] = table->keys;
        header["interp"] =
            table->interp == DeformationTable::Interp::Linear ? "linear" : "nearest";
        append_floats(payload, table->d_position);
        append_floats(payload, table->d_rotation);
        append_floats(payload, table->d_scale);
        append_floats(payload, table->d_opacity);
    } else {
        const auto& basis = std::get<BasisTrajectory>(model);
        header["model"] = "basis";
        header["count"] = basis.count;
        header["order"] = basis.order;
        header["family"] =
            basis.family == BasisTrajectory::Family::Polynomial ? "polynomial" : "fourier";
        append_floats(payload, basis.coefficients);
    }
    header["float_count"] = payload.size();

    const std::string header_str = header.dump();
    auto f = open_out(path);
    f.write(kMagic, 5);
    const uint32_t len = uint32_t(header_str.size());
    unsigned char len_le[4] = {(unsigned char)(len & 0xff), (unsigned char)((len >> 8) & 0xff),
                               (unsigned char)((len >> 16) & 0xff),
                               (unsigned char)((len >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(len_le), 4);
    f.write(header_str.data(), std::streamsize(header_str.size()));
    f.write(reinterpret_cast<const char*>(payload.data()),
            std::streamsize(payload.size() * sizeof(float)));
}

MotionModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[5];
    f.read(magic, 5);
    if (!f || std::memcmp(magic, kMagic, 5) != 0)
        throw std::runtime_error("not an RRGS1 checkpoint: " + path);
    unsigned char len_le[4];
    f.read(reinterpret_cast<char*>(len_le), 4);
    const uint32_t len = uint32_t(len_le[0]) | (uint32_t(len_le[1]) << 8) |
                         (uint32_t(len_le[2]) << 16) | (uint32_t(len_le[3]) << 24);
    std::string header_str(len, '\0');
    f.read(header_str.data(), len);
    const json header = json::parse(header_str);

    std::vector<float> payload(header.at("float_count").get<size_t>());
    f.read(reinterpret_cast<char*>(payload.data()),
           std::streamsize(payload.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint payload truncated: " + path);

    const std::string kind = header.at("model");
    if (kind == "table") {
        DeformationTable t;
        t.count = header.at("count");
        t.keys = header.at("keys").get<std::vector<double>>();
        t.interp = header.at("interp") == "linear" ? DeformationTable::Interp::Linear
                                                   : DeformationTable::Interp::Nearest;
        const size_t n = t.keys.size() * size_t(t.count);
        size_t at = 0;
        at = take_floats(payload, at, t.d_position, n);
        at = take_floats(payload, at, t.d_rotation, n);
        at = take_floats(payload, at, t.d_scale, n);
        at = take_floats(payload, at, t.d_opacity, n);
        t.validate();
        return t;
    }
    if (kind == "basis") {
        BasisTrajectory b;
        b.count = header.at("count");
        b.order = header.at("order");
        b.family = header.at("family") == "polynomial" ? BasisTrajectory::Family::Polynomial
                                                       : BasisTrajectory::Family::Fourier;
        take_floats(payload, 0, b.coefficients, size_t(b.order) * b.count);
        return b;
    }
    throw std::runtime_error("unknown checkpoint model kind: " + kind);
}

void write_ply_points(const std::string& path, const std::vector<Vec3>& points) {
    auto f = open_out(path);
    f << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\nend_header\n";
    for (const auto& p : points) {
        const float xyz[3] = {float(p.x()), float(p.y()), float(p.z())};
        f.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
}

void write_text_file(const std::string& path, const std::string& contents) {
    auto f = open_out(path, std::ios::out);
    f << contents;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                      std::istreambuf_iterator<char>());
}

}  // namespace rrgs
