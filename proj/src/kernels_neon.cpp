// NEON variants for aarch64. float64x2 lanes; same loop structure as the
// AVX2 file.

#include "clear/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace clear::kern {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void scale_neon(double a, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void vadd_neon(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(z + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void max0_neon(double* x, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmaxq_f64(zero, vld1q_f64(x + i)));
    for (; i < n; ++i)
        if (x[i] < 0.0) x[i] = 0.0;
}

void leaky_relu_neon(const double* x, double* y, std::size_t n, double slope) {
    const float64x2_t vs = vdupq_n_f64(slope);
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vx = vld1q_f64(x + i);
        uint64x2_t mask = vcgtq_f64(vx, zero);
        vst1q_f64(y + i, vbslq_f64(mask, vx, vmulq_f64(vs, vx)));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_neon(const double* x, const double* gy, double* gx,
                          std::size_t n, double slope) {
    const float64x2_t vs = vdupq_n_f64(slope);
    const float64x2_t one = vdupq_n_f64(1.0);
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vx = vld1q_f64(x + i);
        float64x2_t d = vbslq_f64(vcgtq_f64(vx, zero), one, vs);
        vst1q_f64(gx + i, vfmaq_f64(vld1q_f64(gx + i), vld1q_f64(gy + i), d));
    }
    for (; i < n; ++i) gx[i] += gy[i] * (x[i] > 0.0 ? 1.0 : slope);
}

}  // namespace

const Ops* neon_ops() {
    static const Ops ops = {
        "neon",
        dot_neon,
        axpy_neon,
        sum_neon,
        scale_neon,
        vadd_neon,
        max0_neon,
        leaky_relu_neon,
        leaky_relu_grad_neon,
    };
    return &ops;
}

}  // namespace clear::kern

#else

namespace clear::kern {
const Ops* neon_ops() { return nullptr; }
}  // namespace clear::kern

#endif
