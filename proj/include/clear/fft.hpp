#pragma once

#include <complex>
#include <vector>

namespace clear::fft {

using cplx = std::complex<double>;

// Unitary 1-D DFT (norm 1/sqrt(n) both directions). Radix-2 when n is a
// power of two, direct summation otherwise; sizes here are desk scale.
void dft1d(cplx* x, int n, bool inverse);

// Unitary 2-D DFT on a row-major h-by-w grid, rows then columns.
void dft2d(std::vector<cplx>& grid, int h, int w, bool inverse);

// Cyclic roll moving DC to the grid center (and back). Masks index
// DC-centered k-space, so the operator shifts after the forward transform
// and unshifts before the inverse.
void fftshift2d(std::vector<cplx>& grid, int h, int w);
void ifftshift2d(std::vector<cplx>& grid, int h, int w);

}  // namespace clear::fft
