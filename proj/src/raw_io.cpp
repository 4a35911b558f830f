#include "sktomo/raw_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sktomo {

namespace {

constexpr char kMagic[4] = {'U', 'S', 'K', 'D'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kDtypeF32 = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
    return std::uint16_t(p[0] | (std::uint16_t(p[1]) << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("raw file '" + path + "': " + why);
}

}  // namespace

void write_raw(const std::string& path, const RawMatrix& m) {
    if (m.data.size() != std::size_t(m.rows) * m.cols) fail(path, "data size does not match rows*cols");
    std::string buf;
    buf.reserve(16 + m.data.size() * 4);
    buf.append(kMagic, 4);
    put_u16(buf, kVersion);
    put_u16(buf, kDtypeF32);
    put_u32(buf, m.rows);
    put_u32(buf, m.cols);
    for (float v : m.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(buf, bits);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open for writing");
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) fail(path, "write failed");
}

RawMatrix read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) fail(path, "cannot open for reading");
    const std::streamoff file_size = in.tellg();
    in.seekg(0);
    unsigned char header[16];
    in.read(reinterpret_cast<char*>(header), 16);
    if (in.gcount() != 16) fail(path, "truncated header");
    if (std::memcmp(header, kMagic, 4) != 0) fail(path, "bad magic bytes");
    const std::uint16_t version = get_u16(header + 4);
    if (version != kVersion) fail(path, "unsupported format version " + std::to_string(version));
    const std::uint16_t dtype = get_u16(header + 6);
    if (dtype != kDtypeF32) fail(path, "unsupported dtype code " + std::to_string(dtype));
    RawMatrix m;
    m.rows = get_u32(header + 8);
    m.cols = get_u32(header + 12);
    const std::size_t count = std::size_t(m.rows) * m.cols;
    if (std::uint64_t(file_size) < 16 + std::uint64_t(count) * 4) fail(path, "truncated payload");
    if (std::uint64_t(file_size) > 16 + std::uint64_t(count) * 4)
        fail(path, "trailing bytes after payload");
    std::vector<unsigned char> payload(count * 4);
    in.read(reinterpret_cast<char*>(payload.data()), std::streamsize(payload.size()));
    if (std::size_t(in.gcount()) != payload.size()) fail(path, "truncated payload");
    m.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = get_u32(payload.data() + 4 * i);
        std::memcpy(&m.data[i], &bits, 4);
    }
    return m;
}

void write_image_raw(const std::string& path, const Image& img) {
    RawMatrix m;
    m.rows = std::uint32_t(img.height);
    m.cols = std::uint32_t(img.width);
    m.data.assign(img.values.begin(), img.values.end());
    write_raw(path, m);
}

Image read_image_raw(const std::string& path) {
    const RawMatrix m = read_raw(path);
    if (m.rows != m.cols) fail(path, "image payload is not square");
    Image img(int(m.rows));
    for (std::size_t i = 0; i < m.data.size(); ++i) img.values[i] = m.data[i];
    return img;
}

void write_sinogram_raw(const std::string& path, const Sinogram& sino) {
    RawMatrix m;
    m.rows = std::uint32_t(sino.num_angles);
    m.cols = std::uint32_t(sino.num_detectors);
    m.data.assign(sino.values.begin(), sino.values.end());
    write_raw(path, m);
}

Sinogram read_sinogram_raw(const std::string& path) {
    const RawMatrix m = read_raw(path);
    Sinogram sino(int(m.rows), int(m.cols));
    for (std::size_t i = 0; i < m.data.size(); ++i) sino.values[i] = m.data[i];
    return sino;
}

std::uint64_t fnv1a64(const void* bytes, std::size_t count) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < count; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open for checksum");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)), in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[std::size_t(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return s;
}

}  // namespace sktomo
