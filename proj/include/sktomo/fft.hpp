#pragma once

#include <cstddef>
#include <vector>

namespace sktomo {

// In-place iterative radix-2 complex FFT. Size must be a power of two.
// The inverse transform includes the 1/n scaling.
void fft_radix2(std::vector<double>& re, std::vector<double>& im, bool inverse);

std::size_t next_pow2(std::size_t n);

}  // namespace sktomo
