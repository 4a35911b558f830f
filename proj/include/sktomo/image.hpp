#pragma once

#include <cstddef>
#include <vector>

namespace sktomo {

// Square grid of attenuation values, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Image() = default;
    Image(int side, double fill = 0.0);

    int side() const { return width; }
    std::size_t size() const { return values.size(); }
    double& at(int row, int col) { return values[std::size_t(row) * width + col]; }
    double at(int row, int col) const { return values[std::size_t(row) * width + col]; }

    bool all_finite() const;
};

// Line-integral measurements, num_angles x num_detectors, row-major.
struct Sinogram {
    int num_angles = 0;
    int num_detectors = 0;
    std::vector<double> values;

    Sinogram() = default;
    Sinogram(int angles, int detectors, double fill = 0.0);

    std::size_t size() const { return values.size(); }
    double& at(int angle, int det) { return values[std::size_t(angle) * num_detectors + det]; }
    double at(int angle, int det) const { return values[std::size_t(angle) * num_detectors + det]; }

    bool all_finite() const;
};

enum class SamplerMethod { bilinear };

// Integer-factor bilinear resampling spec shared by the sketch (downsample)
// and upsample operators.
struct SamplerSpec {
    int factor = 1;
    SamplerMethod method = SamplerMethod::bilinear;
};

// Bilinear downsampling at half-pixel-centered sample points. Each output
// pixel is the bilinear interpolant of the source at the center of its
// covering factor x factor block; for factor 2 this is the block average.
Image downsample(const Image& img, const SamplerSpec& spec);

// Bilinear upsampling at half-pixel-centered target coordinates, with edge
// values replicated beyond the outermost source centers.
Image upsample(const Image& img, const SamplerSpec& spec);

// Exact transposes of the two samplers (scatter of the same interpolation
// weights). Used for backpropagation through the samplers.
Image downsample_adjoint(const Image& coarse, const SamplerSpec& spec, int source_side);
Image upsample_adjoint(const Image& fine, const SamplerSpec& spec, int source_side);

// 10*log10(data_range^2 / MSE); +infinity when the images are identical.
double psnr(const Image& x, const Image& ref, double data_range = 1.0);

// Mean local structural similarity over 8x8 uniform sliding windows,
// C1=(0.01*range)^2, C2=(0.03*range)^2.
double ssim(const Image& x, const Image& ref, double data_range = 1.0);

}  // namespace sktomo
