#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace clear {

// Dense row-major tensor of doubles. Images are {2, H, W} (real/imaginary
// channels); toy points are {d}; parameters use whatever rank fits.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel(shape))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static std::size_t numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 3-D access (c, y, x) for CHW tensors.
    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

bool all_finite(const Tensor& t);

// Throws std::invalid_argument naming `what` if t contains NaN/Inf.
void require_finite(const Tensor& t, const std::string& what);

std::string shape_str(const std::vector<int>& s);

// Elementwise helpers (kernel-backed where it matters).
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double a, const Tensor& x);
Tensor& axpy_inplace(Tensor& y, double a, const Tensor& x);  // y += a*x

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& t);  // Euclidean norm

}  // namespace clear
