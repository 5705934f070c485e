#include "clear/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "clear/fft.hpp"
#include "clear/rng.hpp"

namespace clear::fm {

namespace {

using cplx = std::complex<double>;

void check_image(const Tensor& x) {
    if (x.shape.size() != 3 || x.shape[0] != 2)
        throw std::invalid_argument("image must be 2xHxW, got " + shape_str(x.shape));
    require_finite(x, "image");
}

void check_pair(const SamplingMask& mask, int h, int w, const char* what) {
    if (mask.height != h || mask.width != w)
        throw std::invalid_argument(std::string(what) + ": mask is " +
                                    std::to_string(mask.height) + "x" +
                                    std::to_string(mask.width) + ", operand " +
                                    std::to_string(h) + "x" + std::to_string(w));
}

long long round_ll(double v) { return std::llround(v); }

struct AcsBand {
    int lo, hi;  // [lo, hi) columns (1-D kinds)
};

AcsBand center_band(int w, double frac) {
    const int n = static_cast<int>(round_ll(frac * w));
    const int lo = (w - n) / 2;
    return {lo, lo + n};
}

SamplingMask blank_mask(MaskKind kind, int h, int w) {
    SamplingMask m;
    m.kind = kind;
    m.height = h;
    m.width = w;
    m.keep.assign(static_cast<std::size_t>(h) * w, 0);
    return m;
}

void keep_column(SamplingMask& m, int x) {
    for (int y = 0; y < m.height; ++y) m.keep[static_cast<std::size_t>(y) * m.width + x] = 1;
}

SamplingMask make_1d(MaskKind kind, int h, int w, double accel, double acs_frac,
                     std::uint64_t seed) {
    const AcsBand acs = center_band(w, acs_frac);
    const int n_acs = acs.hi - acs.lo;
    const int n_keep = static_cast<int>(round_ll(w / accel));
    if (n_keep < 1) throw std::invalid_argument("make_mask: acceleration keeps no columns");
    if (n_keep < n_acs)
        throw std::invalid_argument("make_mask: acs_fraction forces acceleration below request");
    std::vector<int> outside;
    for (int x = 0; x < w; ++x)
        if (x < acs.lo || x >= acs.hi) outside.push_back(x);
    const int n_out = n_keep - n_acs;

    SamplingMask m = blank_mask(kind, h, w);
    for (int x = acs.lo; x < acs.hi; ++x) keep_column(m, x);
    if (kind == MaskKind::Uniform1d) {
        const double step = static_cast<double>(outside.size()) / std::max(1, n_out);
        for (int j = 0; j < n_out; ++j)
            keep_column(m, outside[static_cast<std::size_t>((j + 0.5) * step)]);
    } else {
        Rng rng(seed);
        rng.shuffle(outside);
        for (int j = 0; j < n_out; ++j) keep_column(m, outside[j]);
    }
    return m;
}

struct AcsRect {
    int ylo, yhi, xlo, xhi;
    bool contains(int y, int x) const { return y >= ylo && y < yhi && x >= xlo && x < xhi; }
};

AcsRect center_rect(int h, int w, double frac) {
    const AcsBand by = center_band(h, frac);
    const AcsBand bx = center_band(w, frac);
    return {by.lo, by.hi, bx.lo, bx.hi};
}

// Dart throwing at minimum-distance radius r scaled by distance from the
// k-space center (denser sampling at low frequencies).
std::size_t poisson_fill(SamplingMask& m, const AcsRect& acs, double r_base,
                         const std::vector<int>& order) {
    const int h = m.height, w = m.width;
    const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
    const double dmax = std::hypot(cy, cx);
    std::fill(m.keep.begin(), m.keep.end(), 0);
    std::vector<std::pair<int, int>> kept;
    for (int y = acs.ylo; y < acs.yhi; ++y)
        for (int x = acs.xlo; x < acs.xhi; ++x) {
            m.keep[static_cast<std::size_t>(y) * w + x] = 1;
            kept.emplace_back(y, x);
        }
    for (int idx : order) {
        const int y = idx / w, x = idx % w;
        if (acs.contains(y, x)) continue;
        const double d = std::hypot(y - cy, x - cx) / std::max(dmax, 1.0);
        const double r = r_base * (0.35 + d);
        bool blocked = false;
        for (const auto& [ky, kx] : kept) {
            const double dy = ky - y, dx = kx - x;
            if (dy * dy + dx * dx < r * r) {
                blocked = true;
                break;
            }
        }
        if (!blocked) {
            m.keep[static_cast<std::size_t>(y) * w + x] = 1;
            kept.emplace_back(y, x);
        }
    }
    return kept.size();
}

SamplingMask make_poisson(int h, int w, double accel, double acs_frac, std::uint64_t seed) {
    const AcsRect acs = center_rect(h, w, acs_frac);
    const std::size_t total = static_cast<std::size_t>(h) * w;
    const std::size_t n_target = static_cast<std::size_t>(round_ll(total / accel));
    const std::size_t n_acs = static_cast<std::size_t>(acs.yhi - acs.ylo) * (acs.xhi - acs.xlo);
    if (n_target < 1) throw std::invalid_argument("make_mask: acceleration keeps nothing");
    if (n_acs > n_target)
        throw std::invalid_argument("make_mask: acs_fraction forces acceleration below request");

    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    SamplingMask m = blank_mask(MaskKind::Poisson2d, h, w);
    double lo = 0.0, hi = 2.0 * std::max(h, w);
    std::size_t best_count = 0;
    double best_err = 1e300, best_r = 1.0;
    for (int it = 0; it < 48; ++it) {
        const double r = 0.5 * (lo + hi);
        const std::size_t count = poisson_fill(m, acs, r, order);
        const double err = std::abs(static_cast<double>(count) - static_cast<double>(n_target));
        if (err < best_err) {
            best_err = err;
            best_r = r;
            best_count = count;
        }
        if (count == n_target) break;
        if (count > n_target)
            lo = r;  // too dense, grow radius
        else
            hi = r;
    }
    poisson_fill(m, acs, best_r, order);
    const double achieved = static_cast<double>(total) / static_cast<double>(best_count);
    if (std::abs(achieved - accel) > 0.1 * accel)
        throw std::runtime_error("make_mask: poisson-2d missed acceleration target");
    return m;
}

SamplingMask make_gaussian(int h, int w, double accel, double acs_frac, std::uint64_t seed) {
    const AcsRect acs = center_rect(h, w, acs_frac);
    const std::size_t total = static_cast<std::size_t>(h) * w;
    const std::size_t n_target = static_cast<std::size_t>(round_ll(total / accel));
    std::size_t n_acs = static_cast<std::size_t>(acs.yhi - acs.ylo) * (acs.xhi - acs.xlo);
    if (n_target < 1) throw std::invalid_argument("make_mask: acceleration keeps nothing");
    if (n_acs > n_target)
        throw std::invalid_argument("make_mask: acs_fraction forces acceleration below request");

    const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
    const double sigma = 0.25 * std::min(h, w);
    std::vector<double> weight(total, 0.0);
    SamplingMask m = blank_mask(MaskKind::Gaussian2d, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (acs.contains(y, x)) {
                m.keep[i] = 1;
            } else {
                const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                weight[i] = std::exp(-0.5 * d2 / (sigma * sigma));
            }
        }
    Rng rng(seed);
    std::size_t kept = n_acs;
    while (kept < n_target) {
        double mass = 0.0;
        for (double v : weight) mass += v;
        if (mass <= 0.0) throw std::runtime_error("make_mask: gaussian-2d ran out of cells");
        double u = rng.uniform(0.0, mass), acc = 0.0;
        std::size_t pick = total - 1;
        for (std::size_t i = 0; i < total; ++i) {
            acc += weight[i];
            if (u <= acc && weight[i] > 0.0) {
                pick = i;
                break;
            }
        }
        m.keep[pick] = 1;
        weight[pick] = 0.0;
        ++kept;
    }
    return m;
}

}  // namespace

const char* mask_kind_name(MaskKind k) {
    switch (k) {
        case MaskKind::Uniform1d: return "uniform-1d";
        case MaskKind::Random1d: return "random-1d";
        case MaskKind::Poisson2d: return "poisson-2d";
        case MaskKind::Gaussian2d: return "gaussian-2d";
    }
    return "?";
}

MaskKind mask_kind_from_name(const std::string& name) {
    if (name == "uniform-1d") return MaskKind::Uniform1d;
    if (name == "random-1d") return MaskKind::Random1d;
    if (name == "poisson-2d") return MaskKind::Poisson2d;
    if (name == "gaussian-2d") return MaskKind::Gaussian2d;
    throw std::invalid_argument("unknown mask kind '" + name + "'");
}

std::size_t SamplingMask::kept_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : keep) n += v;
    return n;
}

double SamplingMask::achieved_acceleration() const {
    const std::size_t n = kept_count();
    if (n == 0) throw std::logic_error("mask keeps nothing");
    return static_cast<double>(keep.size()) / static_cast<double>(n);
}

SamplingMask make_mask(MaskKind kind, int height, int width, double acceleration,
                       double acs_fraction, std::uint64_t seed) {
    if (height < 1 || width < 1) throw std::invalid_argument("make_mask: bad shape");
    if (!(acceleration > 1.0)) throw std::invalid_argument("make_mask: acceleration must be > 1");
    if (acs_fraction < 0.0 || acs_fraction >= 1.0)
        throw std::invalid_argument("make_mask: acs_fraction must lie in [0,1)");
    SamplingMask m;
    switch (kind) {
        case MaskKind::Uniform1d:
        case MaskKind::Random1d:
            m = make_1d(kind, height, width, acceleration, acs_fraction, seed);
            break;
        case MaskKind::Poisson2d:
            m = make_poisson(height, width, acceleration, acs_fraction, seed);
            break;
        case MaskKind::Gaussian2d:
            m = make_gaussian(height, width, acceleration, acs_fraction, seed);
            break;
    }
    const double achieved = m.achieved_acceleration();
    if (std::abs(achieved - acceleration) > 0.1 * acceleration)
        throw std::runtime_error("make_mask: achieved acceleration " +
                                 std::to_string(achieved) + " outside 10% of " +
                                 std::to_string(acceleration));
    return m;
}

std::vector<cplx> image_to_grid(const Tensor& x) {
    check_image(x);
    const int h = x.shape[1], w = x.shape[2];
    std::vector<cplx> grid(static_cast<std::size_t>(h) * w);
    const double* re = x.ptr();
    const double* im = x.ptr() + grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = cplx(re[i], im[i]);
    return grid;
}

Tensor grid_to_image(const std::vector<cplx>& grid, int h, int w) {
    if (grid.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("grid_to_image: size mismatch");
    Tensor x({2, h, w});
    double* re = x.ptr();
    double* im = x.ptr() + grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        re[i] = grid[i].real();
        im[i] = grid[i].imag();
    }
    return x;
}

Measurement apply_A(const SamplingMask& mask, const Tensor& x) {
    check_image(x);
    check_pair(mask, x.shape[1], x.shape[2], "apply_A");
    std::vector<cplx> grid = image_to_grid(x);
    fft::dft2d(grid, mask.height, mask.width, false);
    fft::fftshift2d(grid, mask.height, mask.width);
    Measurement b;
    b.height = mask.height;
    b.width = mask.width;
    b.data.assign(grid.size(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (mask.keep[i]) b.data[i] = grid[i];
    return b;
}

Tensor apply_A_adjoint(const SamplingMask& mask, const Measurement& b) {
    check_pair(mask, b.height, b.width, "apply_A_adjoint");
    std::vector<cplx> grid(b.data.size(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (mask.keep[i]) grid[i] = b.data[i];
    fft::ifftshift2d(grid, mask.height, mask.width);
    fft::dft2d(grid, mask.height, mask.width, true);
    return grid_to_image(grid, mask.height, mask.width);
}

Tensor project_data_consistency(const SamplingMask& mask, const Measurement& b,
                                const Tensor& x) {
    check_image(x);
    check_pair(mask, x.shape[1], x.shape[2], "project_data_consistency");
    check_pair(mask, b.height, b.width, "project_data_consistency");
    std::vector<cplx> grid = image_to_grid(x);
    fft::dft2d(grid, mask.height, mask.width, false);
    fft::fftshift2d(grid, mask.height, mask.width);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (mask.keep[i]) grid[i] = b.data[i];
    fft::ifftshift2d(grid, mask.height, mask.width);
    fft::dft2d(grid, mask.height, mask.width, true);
    return grid_to_image(grid, mask.height, mask.width);
}

Measurement add_noise(const SamplingMask& mask, const Measurement& b, double level,
                      std::uint64_t seed) {
    check_pair(mask, b.height, b.width, "add_noise");
    if (level < 0.0) throw std::invalid_argument("add_noise: level must be >= 0");
    Measurement out = b;
    if (level == 0.0) return out;
    double power = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < b.data.size(); ++i)
        if (mask.keep[i]) {
            power += std::norm(b.data[i]);
            ++n;
        }
    if (n == 0) return out;
    const double rms = std::sqrt(power / static_cast<double>(n));
    const double comp_std = level * rms / std::sqrt(2.0);
    Rng rng(seed);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (mask.keep[i])
            out.data[i] += cplx(rng.normal(0.0, comp_std), rng.normal(0.0, comp_std));
    return out;
}

double residual_norm(const SamplingMask& mask, const Measurement& b, const Tensor& x) {
    const Measurement ax = apply_A(mask, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < ax.data.size(); ++i)
        if (mask.keep[i]) acc += std::norm(ax.data[i] - b.data[i]);
    return std::sqrt(acc);
}

bool support_consistent(const SamplingMask& mask, const Measurement& b, double tol) {
    if (mask.height != b.height || mask.width != b.width) return false;
    for (std::size_t i = 0; i < b.data.size(); ++i)
        if (!mask.keep[i] && std::abs(b.data[i]) > tol) return false;
    return true;
}

}  // namespace clear::fm
