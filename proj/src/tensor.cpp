#include "clear/tensor.hpp"

#include <cmath>

#include "clear/kernels.hpp"

namespace clear {

bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(const Tensor& t, const std::string& what) {
    if (!all_finite(t))
        throw std::invalid_argument(what + ": contains non-finite values");
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

static void check_same(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("tensor: shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    check_same(a, b);
    Tensor out(a.shape);
    kern::active().vadd(a.ptr(), b.ptr(), out.ptr(), a.size());
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    check_same(a, b);
    Tensor out = a;
    kern::active().axpy(-1.0, b.ptr(), out.ptr(), out.size());
    return out;
}

Tensor operator*(double a, const Tensor& x) {
    Tensor out = x;
    kern::active().scale(a, out.ptr(), out.size());
    return out;
}

Tensor& axpy_inplace(Tensor& y, double a, const Tensor& x) {
    check_same(y, x);
    kern::active().axpy(a, x.ptr(), y.ptr(), y.size());
    return y;
}

double dot(const Tensor& a, const Tensor& b) {
    check_same(a, b);
    return kern::active().dot(a.ptr(), b.ptr(), a.size());
}

double norm2(const Tensor& t) {
    return std::sqrt(kern::active().dot(t.ptr(), t.ptr(), t.size()));
}

}  // namespace clear
