#pragma once

#include <cstdint>
#include <random>

#include "clear/tensor.hpp"

namespace clear {

// Seeded RNG used everywhere randomness is specified. One engine per
// operation, seeded explicitly, so every result is reproducible from its
// seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double normal(double mean = 0.0, double std = 1.0) {
        return std::normal_distribution<double>(mean, std)(eng_);
    }
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
    }

    void fill_normal(Tensor& t, double std) {
        std::normal_distribution<double> d(0.0, std);
        for (double& v : t.data) v = d(eng_);
    }

    Tensor normal_tensor(const std::vector<int>& shape, double std) {
        Tensor t(shape);
        fill_normal(t, std);
        return t;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream, for per-sample reproducibility.
    Rng fork() { return Rng(eng_() ^ 0x9e3779b97f4a7c15ULL); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace clear
