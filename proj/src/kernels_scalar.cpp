#include "clear/kernels.hpp"

// Reference kernels. Plain loops, fixed evaluation order; the SIMD variants
// are tested against these.

namespace clear::kern {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void vadd_scalar(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void max0_scalar(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] < 0.0) x[i] = 0.0;
}

void leaky_relu_scalar(const double* x, double* y, std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_scalar(const double* x, const double* gy, double* gx,
                            std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * (x[i] > 0.0 ? 1.0 : slope);
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",
        dot_scalar,
        axpy_scalar,
        sum_scalar,
        scale_scalar,
        vadd_scalar,
        max0_scalar,
        leaky_relu_scalar,
        leaky_relu_grad_scalar,
    };
    return ops;
}

}  // namespace clear::kern
