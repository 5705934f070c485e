#include "clear/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace clear::metrics {

namespace {

constexpr int kWindow = 8;

void check_same(const Tensor& ref, const Tensor& test, const char* what) {
    if (!ref.same_shape(test))
        throw std::invalid_argument(std::string(what) + ": shapes differ, " +
                                    shape_str(ref.shape) + " vs " + shape_str(test.shape));
}

}  // namespace

Tensor magnitude_image(const Tensor& img) {
    if (img.shape.size() != 3 || img.shape[0] != 2)
        throw std::invalid_argument("magnitude_image: expected 2xHxW, got " +
                                    shape_str(img.shape));
    const int h = img.shape[1], w = img.shape[2];
    Tensor out({h, w});
    const double* re = img.ptr();
    const double* im = re + out.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::hypot(re[i], im[i]);
    return out;
}

double psnr(const Tensor& ref, const Tensor& test, double peak) {
    check_same(ref, test, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = test[i] - ref[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ref.size());
    if (mse < peak * peak * 1e-20) return 200.0;
    return 10.0 * std::log10(peak * peak / mse);
}

double nmse(const Tensor& ref, const Tensor& test) {
    check_same(ref, test, "nmse");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = test[i] - ref[i];
        num += d * d;
        den += ref[i] * ref[i];
    }
    if (den == 0.0) throw std::invalid_argument("nmse: zero reference");
    return num / den;
}

double ssim(const Tensor& ref, const Tensor& test) {
    check_same(ref, test, "ssim");
    int h, w;
    if (ref.shape.size() == 2) {
        h = ref.shape[0];
        w = ref.shape[1];
    } else if (ref.shape.size() == 3 && ref.shape[0] == 1) {
        h = ref.shape[1];
        w = ref.shape[2];
    } else {
        throw std::invalid_argument("ssim: expected a single-channel image, got " +
                                    shape_str(ref.shape));
    }
    if (h < kWindow || w < kWindow)
        throw std::invalid_argument("ssim: image smaller than the 8x8 window");

    double peak = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) peak = std::max(peak, std::abs(ref[i]));
    if (peak == 0.0) peak = 1.0;
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const double n = kWindow * kWindow;

    const double* a = ref.ptr();
    const double* b = test.ptr();
    double total = 0.0;
    std::size_t windows = 0;
    for (int y = 0; y + kWindow <= h; ++y) {
        for (int x = 0; x + kWindow <= w; ++x) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = 0; dy < kWindow; ++dy)
                for (int dx = 0; dx < kWindow; ++dx) {
                    const double va = a[static_cast<std::size_t>(y + dy) * w + x + dx];
                    const double vb = b[static_cast<std::size_t>(y + dy) * w + x + dx];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            const double mu_a = sa / n, mu_b = sb / n;
            const double var_a = saa / n - mu_a * mu_a;
            const double var_b = sbb / n - mu_b * mu_b;
            const double cov = sab / n - mu_a * mu_b;
            total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

}  // namespace clear::metrics
