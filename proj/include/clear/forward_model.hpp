#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "clear/tensor.hpp"

// Masked unitary-Fourier imaging operator A and its exact data-consistency
// projection. Images are [2,H,W] tensors (real, imaginary); measurements
// live on the DC-centered k-space grid (mask row h/2, column w/2 is the
// zero frequency) and are exactly zero off the mask support.

namespace clear::fm {

enum class MaskKind { Uniform1d, Random1d, Poisson2d, Gaussian2d };

const char* mask_kind_name(MaskKind k);
MaskKind mask_kind_from_name(const std::string& name);

struct SamplingMask {
    MaskKind kind = MaskKind::Uniform1d;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> keep;  // row-major, entries 0/1

    bool at(int y, int x) const { return keep[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t kept_count() const;
    double achieved_acceleration() const;  // total / kept
};

struct Measurement {
    int height = 0;
    int width = 0;
    std::vector<std::complex<double>> data;  // row-major k-space

    std::complex<double>& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    const std::complex<double>& at(int y, int x) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
};

// acs_fraction is the fully-sampled center fraction: a column band for the
// 1-D kinds, a center rectangle for the 2-D kinds. Achieved acceleration is
// guaranteed within 10% of the request or an error is thrown.
SamplingMask make_mask(MaskKind kind, int height, int width, double acceleration,
                       double acs_fraction, std::uint64_t seed);

std::vector<std::complex<double>> image_to_grid(const Tensor& x);
Tensor grid_to_image(const std::vector<std::complex<double>>& grid, int h, int w);

Measurement apply_A(const SamplingMask& mask, const Tensor& x);
Tensor apply_A_adjoint(const SamplingMask& mask, const Measurement& b);

// Exact Euclidean projection onto {x : Ax = b}: sampled k-space entries
// replaced by b, unsampled ones kept.
Tensor project_data_consistency(const SamplingMask& mask, const Measurement& b,
                                const Tensor& x);

// Complex Gaussian noise on the support only, std level * rms(b on support).
Measurement add_noise(const SamplingMask& mask, const Measurement& b, double level,
                      std::uint64_t seed);

double residual_norm(const SamplingMask& mask, const Measurement& b, const Tensor& x);
bool support_consistent(const SamplingMask& mask, const Measurement& b, double tol = 0.0);

}  // namespace clear::fm
