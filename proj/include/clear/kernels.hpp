#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the layer math, the weight clipper and
// the reductions. Every kernel has a scalar reference implementation plus
// SIMD variants (AVX2 on x86-64, NEON on aarch64) selected once at startup.
// Variants are equivalence-tested against the scalar path; within one
// process the selected backend is fixed, so results are reproducible
// run-to-run.

namespace clear::kern {

struct Ops {
    const char* name;

    // sum_i x[i]*y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y[i] += a*x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
    // x[i] *= a
    void (*scale)(double a, double* x, std::size_t n);
    // z[i] = x[i] + y[i]
    void (*vadd)(const double* x, const double* y, double* z, std::size_t n);
    // x[i] = max(x[i], 0)
    void (*max0)(double* x, std::size_t n);
    // y[i] = x[i] > 0 ? x[i] : slope*x[i]
    void (*leaky_relu)(const double* x, double* y, std::size_t n, double slope);
    // gx[i] += gy[i] * (x[i] > 0 ? 1 : slope)
    void (*leaky_relu_grad)(const double* x, const double* gy, double* gx,
                            std::size_t n, double slope);
};

const Ops& scalar_ops();

// Null when the CPU (or build) lacks the instruction set.
const Ops* avx2_ops();
const Ops* neon_ops();

// Backend in effect. First call resolves "auto" (or the CLEAR_SIMD
// environment variable: scalar|avx2|neon|auto).
const Ops& active();

// Force a backend by name. Returns false if unavailable; active() is
// unchanged in that case.
bool select(std::string_view name);

}  // namespace clear::kern
