#pragma once

// Raw matrix container used for images, sinograms and parameter arrays.
// Layout: 16-byte header (magic "USKD", format version u16, dtype code u16,
// rows u32, cols u32, all little-endian), then row-major little-endian
// 32-bit floats. Round-trips are bit-exact.

#include <cstdint>
#include <string>
#include <vector>

#include "sktomo/image.hpp"

namespace sktomo {

struct RawMatrix {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<float> data;  // row-major, rows*cols entries
};

// Throws std::runtime_error naming the file on any I/O or format problem
// (bad magic, unsupported version/dtype, truncated payload, size mismatch).
void write_raw(const std::string& path, const RawMatrix& m);
RawMatrix read_raw(const std::string& path);

// Convenience wrappers; values are converted to/from float32.
void write_image_raw(const std::string& path, const Image& img);
Image read_image_raw(const std::string& path);
void write_sinogram_raw(const std::string& path, const Sinogram& sino);
Sinogram read_sinogram_raw(const std::string& path);

// FNV-1a 64-bit hash, used for manifest checksums.
std::uint64_t fnv1a64(const void* bytes, std::size_t count);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t value);

}  // namespace sktomo
