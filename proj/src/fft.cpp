#include "clear/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace clear::fft {
namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void radix2(cplx* x, int n, bool inverse) {
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * kPi / len;
        const cplx wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                cplx u = x[i + k];
                cplx v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

void direct(cplx* x, int n, bool inverse) {
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cplx> tw(n);
    for (int k = 0; k < n; ++k) {
        double ang = sign * 2.0 * kPi * k / n;
        tw[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> out(n);
    for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (int j = 0; j < n; ++j) acc += x[j] * tw[(static_cast<long long>(k) * j) % n];
        out[k] = acc;
    }
    for (int k = 0; k < n; ++k) x[k] = out[k];
}

}  // namespace

void dft1d(cplx* x, int n, bool inverse) {
    if (n <= 0) throw std::invalid_argument("dft1d: n must be positive");
    if (n == 1) return;
    if (is_pow2(n))
        radix2(x, n, inverse);
    else
        direct(x, n, inverse);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) x[i] *= s;
}

void dft2d(std::vector<cplx>& grid, int h, int w, bool inverse) {
    if (static_cast<std::size_t>(h) * w != grid.size())
        throw std::invalid_argument("dft2d: grid size does not match h*w");
    for (int r = 0; r < h; ++r) dft1d(grid.data() + static_cast<std::size_t>(r) * w, w, inverse);
    std::vector<cplx> col(h);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) col[r] = grid[static_cast<std::size_t>(r) * w + c];
        dft1d(col.data(), h, inverse);
        for (int r = 0; r < h; ++r) grid[static_cast<std::size_t>(r) * w + c] = col[r];
    }
}

namespace {

// Roll rows down by dy and columns right by dx (mod size).
void roll2d(std::vector<cplx>& grid, int h, int w, int dy, int dx) {
    std::vector<cplx> out(grid.size());
    for (int y = 0; y < h; ++y) {
        const int ty = (y + dy) % h;
        for (int x = 0; x < w; ++x)
            out[static_cast<std::size_t>(ty) * w + (x + dx) % w] =
                grid[static_cast<std::size_t>(y) * w + x];
    }
    grid.swap(out);
}

}  // namespace

void fftshift2d(std::vector<cplx>& grid, int h, int w) {
    if (static_cast<std::size_t>(h) * w != grid.size())
        throw std::invalid_argument("fftshift2d: grid size does not match h*w");
    roll2d(grid, h, w, h / 2, w / 2);
}

void ifftshift2d(std::vector<cplx>& grid, int h, int w) {
    if (static_cast<std::size_t>(h) * w != grid.size())
        throw std::invalid_argument("ifftshift2d: grid size does not match h*w");
    roll2d(grid, h, w, h - h / 2, w - w / 2);
}

}  // namespace clear::fft
