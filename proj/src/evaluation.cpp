#include "clear/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <thread>

namespace clear::eval {

namespace {

struct Ellipse {
    double cx, cy, a, b, angle, delta;
    // Interior texture: a tapered sinusoid, zero at the boundary so edges
    // stay sharp. fu/fv are in radians per normalized unit.
    double tex_amp = 0.0, tex_fu = 0.0, tex_fv = 0.0, tex_phase = 0.0;
};

// Coordinates normalized to [-1, 1] on both axes.
bool inside(const Ellipse& e, double u, double v, double* rho2) {
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double du = u - e.cx, dv = v - e.cy;
    const double p = (c * du + s * dv) / e.a;
    const double q = (-s * du + c * dv) / e.b;
    *rho2 = p * p + q * q;
    return *rho2 <= 1.0;
}

void paint(Tensor& img, const Ellipse& e, bool shade) {
    const int n = img.shape[1];
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double u = 2.0 * (x + 0.5) / n - 1.0;
            const double v = 2.0 * (y + 0.5) / n - 1.0;
            double rho2;
            if (inside(e, u, v, &rho2)) {
                double val = e.delta * (shade ? 1.0 - 0.3 * rho2 : 1.0);
                if (e.tex_amp != 0.0)
                    val += e.tex_amp * (1.0 - rho2 * rho2) *
                           std::sin(e.tex_fu * u + e.tex_fv * v + e.tex_phase);
                img.at(0, y, x) += val;
            }
        }
}

void clamp01(Tensor& img) {
    const std::size_t plane = img.size() / 2;
    for (std::size_t i = 0; i < plane; ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
}

Tensor phantom_ellipses(int size, Rng& rng) {
    Tensor img({2, size, size});
    const std::size_t plane = img.size() / 2;
    for (std::size_t i = 0; i < plane; ++i) img[i] = 0.05;
    const int count = rng.uniform_int(3, 6);
    for (int k = 0; k < count; ++k) {
        Ellipse e;
        e.cx = rng.uniform(-0.45, 0.45);
        e.cy = rng.uniform(-0.45, 0.45);
        e.a = rng.uniform(0.15, 0.5);
        e.b = rng.uniform(0.15, 0.5);
        e.angle = rng.uniform(0.0, 3.14159265358979323846);
        e.delta = rng.uniform(0.3, 0.5) * (k > 0 && rng.uniform(0.0, 1.0) < 0.3 ? -0.5 : 1.0);
        e.tex_amp = rng.uniform(0.12, 0.22);
        const double freq = rng.uniform(2.0, 8.0) * 3.14159265358979323846;
        const double dir = rng.uniform(0.0, 3.14159265358979323846);
        e.tex_fu = freq * std::cos(dir);
        e.tex_fv = freq * std::sin(dir);
        e.tex_phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        paint(img, e, true);
    }
    clamp01(img);
    return img;
}

Tensor phantom_piecewise(int size, Rng& rng) {
    Tensor img({2, size, size});
    const int count = rng.uniform_int(3, 6);
    for (int k = 0; k < count; ++k) {
        const int x0 = rng.uniform_int(0, size - 2);
        const int y0 = rng.uniform_int(0, size - 2);
        const int x1 = rng.uniform_int(x0 + 1, size - 1);
        const int y1 = rng.uniform_int(y0 + 1, size - 1);
        const double level = rng.uniform(0.2, 0.9);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) img.at(0, y, x) = level;
    }
    clamp01(img);
    return img;
}

Tensor phantom_shepp(int size, Rng& rng) {
    static const Ellipse base[] = {
        {0.0, 0.0, 0.72, 0.92, 0.0, 1.0},   {0.0, -0.018, 0.66, 0.87, 0.0, -0.8},
        {0.22, 0.0, 0.11, 0.31, -0.4, -0.2}, {-0.22, 0.0, 0.16, 0.41, 0.4, -0.2},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.15},  {0.0, 0.1, 0.046, 0.046, 0.0, 0.15},
        {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1}, {0.06, -0.605, 0.046, 0.046, 0.0, 0.1}};
    Tensor img({2, size, size});
    for (const Ellipse& e0 : base) {
        Ellipse e = e0;
        e.cx += rng.uniform(-0.02, 0.02);
        e.cy += rng.uniform(-0.02, 0.02);
        e.delta *= 0.5 * (1.0 + rng.uniform(-0.04, 0.04));
        paint(img, e, false);
    }
    clamp01(img);
    return img;
}

// Chambolle dual iteration for prox of lambda*TV on one channel. p is the
// warm-started dual field (2 components per pixel).
void tv_prox_channel(const double* g, double* out, std::vector<double>& p, int h, int w,
                     double lambda, int inner) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (p.size() != 2 * n) p.assign(2 * n, 0.0);
    if (lambda <= 0.0) {
        std::copy(g, g + n, out);
        return;
    }
    double* px = p.data();
    double* py = p.data() + n;
    std::vector<double> div(n), u(n);
    const double tau = 0.125;
    for (int it = 0; it < inner; ++it) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                double d = 0.0;
                if (x < w - 1) d += px[i];
                if (x > 0) d -= px[i - 1];
                if (y < h - 1) d += py[i];
                if (y > 0) d -= py[i - w];
                div[i] = d;
                u[i] = div[i] - g[i] / lambda;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double gx = x < w - 1 ? u[i + 1] - u[i] : 0.0;
                const double gy = y < h - 1 ? u[i + w] - u[i] : 0.0;
                const double mag = std::sqrt(gx * gx + gy * gy);
                px[i] = (px[i] + tau * gx) / (1.0 + tau * mag);
                py[i] = (py[i] + tau * gy) / (1.0 + tau * mag);
            }
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            double d = 0.0;
            if (x < w - 1) d += px[i];
            if (x > 0) d -= px[i - 1];
            if (y < h - 1) d += py[i];
            if (y > 0) d -= py[i - w];
            out[i] = g[i] - lambda * d;
        }
}

}  // namespace

const char* phantom_kind_name(PhantomKind k) {
    switch (k) {
        case PhantomKind::Ellipses: return "ellipses";
        case PhantomKind::PiecewiseConstant: return "piecewise-constant";
        case PhantomKind::SheppLoganLike: return "shepp-logan-like";
    }
    return "?";
}

PhantomKind phantom_kind_from_name(const std::string& name) {
    if (name == "ellipses") return PhantomKind::Ellipses;
    if (name == "piecewise-constant") return PhantomKind::PiecewiseConstant;
    if (name == "shepp-logan-like") return PhantomKind::SheppLoganLike;
    throw std::invalid_argument("unknown phantom kind '" + name + "'");
}

Tensor make_phantom(PhantomKind kind, int size, std::uint64_t seed) {
    if (size < 16) throw std::invalid_argument("make_phantom: size must be >= 16");
    Rng rng(seed);
    switch (kind) {
        case PhantomKind::Ellipses: return phantom_ellipses(size, rng);
        case PhantomKind::PiecewiseConstant: return phantom_piecewise(size, rng);
        case PhantomKind::SheppLoganLike: return phantom_shepp(size, rng);
    }
    throw std::logic_error("make_phantom: unknown kind");
}

double tv_value(const Tensor& img) {
    if (img.shape.size() != 3)
        throw std::invalid_argument("tv_value: expected CxHxW, got " + shape_str(img.shape));
    const int c = img.shape[0], h = img.shape[1], w = img.shape[2];
    double total = 0.0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double gx = x < w - 1 ? img.at(ch, y, x + 1) - img.at(ch, y, x) : 0.0;
                const double gy = y < h - 1 ? img.at(ch, y + 1, x) - img.at(ch, y, x) : 0.0;
                total += std::sqrt(gx * gx + gy * gy);
            }
    return total;
}

double tv_objective(const fm::SamplingMask& mask, const fm::Measurement& b, const Tensor& x,
                    double weight) {
    const double r = fm::residual_norm(mask, b, x);
    return r * r + weight * tv_value(x);
}

Tensor tv_reconstruct(const fm::SamplingMask& mask, const fm::Measurement& b, double weight,
                      int iters) {
    if (weight < 0.0) throw std::invalid_argument("tv_reconstruct: weight must be >= 0");
    if (iters < 1) throw std::invalid_argument("tv_reconstruct: iters must be >= 1");
    const int h = mask.height, w = mask.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    Tensor x = fm::apply_A_adjoint(mask, b);
    double obj = tv_objective(mask, b, x, weight);
    std::vector<double> dual_re, dual_im;
    const double step = 0.5;  // gradient Lipschitz constant is 2
    const int inner = 30;

    for (int it = 0; it < iters; ++it) {
        // z = x - step * 2 A^H (A x - b)
        fm::Measurement ax = fm::apply_A(mask, x);
        for (std::size_t i = 0; i < ax.data.size(); ++i)
            if (mask.keep[i]) ax.data[i] -= b.data[i];
        Tensor grad = fm::apply_A_adjoint(mask, ax);
        Tensor z = x;
        axpy_inplace(z, -2.0 * step, grad);

        Tensor next({2, h, w});
        tv_prox_channel(z.ptr(), next.ptr(), dual_re, h, w, step * weight, inner);
        tv_prox_channel(z.ptr() + plane, next.ptr() + plane, dual_im, h, w, step * weight,
                        inner);

        const double next_obj = tv_objective(mask, b, next, weight);
        if (next_obj > obj) break;  // inexact prox stopped improving
        x = std::move(next);
        obj = next_obj;
    }
    return x;
}

namespace {

struct Method {
    std::string name;
    const icnn::ConvexNet* net = nullptr;  // null for zero-filled / tv
};

MetricsRecord measure(const std::string& method, const std::string& mask_name, int image_id,
                      const Tensor& ref, const Tensor& recon) {
    const Tensor ref_mag = metrics::magnitude_image(ref);
    const Tensor rec_mag = metrics::magnitude_image(recon);
    double peak = 0.0;
    for (std::size_t i = 0; i < ref_mag.size(); ++i) peak = std::max(peak, ref_mag[i]);
    if (peak <= 0.0) peak = 1.0;
    MetricsRecord rec;
    rec.method = method;
    rec.mask = mask_name;
    rec.image_id = image_id;
    rec.nmse = metrics::nmse(ref_mag, rec_mag);
    rec.psnr_db = metrics::psnr(ref_mag, rec_mag, peak);
    rec.ssim = metrics::ssim(ref_mag, rec_mag);
    return rec;
}

}  // namespace

std::vector<MetricsRecord> evaluate_suite(const std::vector<train::Checkpoint>& checkpoints,
                                          const std::vector<Tensor>& dataset,
                                          const EvalConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("evaluate_suite: empty dataset");
    if (cfg.masks.empty()) throw std::invalid_argument("evaluate_suite: no masks");

    std::vector<std::pair<std::string, icnn::ConvexNet>> nets;
    for (const train::Checkpoint& ckpt : checkpoints) {
        const std::string name = train::mode_name(ckpt.mode);
        for (const auto& [existing, _] : nets)
            if (existing == name)
                throw std::invalid_argument("evaluate_suite: duplicate checkpoint for " + name);
        nets.emplace_back(name, train::net_from_checkpoint(ckpt));
    }
    for (const char* want : {"AR", "UNCLEAR", "CLEAR"}) {
        bool found = false;
        for (const auto& [name, _] : nets) found = found || name == want;
        if (!found) std::cerr << "evaluate: no checkpoint for " << want << ", skipped\n";
    }

    std::vector<Method> methods;
    methods.push_back({"zero-filled", nullptr});
    methods.push_back({"tv", nullptr});
    for (const auto& [name, net] : nets) methods.push_back({name, &net});

    const int n_images = static_cast<int>(dataset.size());
    const int n_masks = static_cast<int>(cfg.masks.size());
    const int jobs = n_masks * n_images;
    std::vector<std::vector<MetricsRecord>> per_job(jobs);

    auto run_job = [&](int job) {
        const int mi = job / n_images;
        const int ii = job % n_images;
        const fm::SamplingMask& mask = cfg.masks[mi];
        const Tensor& ref = dataset[ii];
        const std::string mask_name = std::string(fm::mask_kind_name(mask.kind)) + "-x" +
                                      std::to_string(mask.achieved_acceleration()).substr(0, 4);
        fm::Measurement b = fm::apply_A(mask, ref);
        if (cfg.noise_level > 0.0) {
            const std::uint64_t noise_seed =
                cfg.seed * 6364136223846793005ULL + static_cast<std::uint64_t>(mi) * 2654435761ULL +
                static_cast<std::uint64_t>(ii);
            b = fm::add_noise(mask, b, cfg.noise_level, noise_seed);
        }
        for (const Method& method : methods) {
            Tensor recon;
            if (method.name == "zero-filled") {
                recon = fm::apply_A_adjoint(mask, b);
            } else if (method.name == "tv") {
                recon = tv_reconstruct(mask, b, cfg.tv_weight, cfg.tv_iters);
            } else {
                solver::PGDConfig pgd = cfg.pgd;
                pgd.record_trace = false;
                pgd.ground_truth = nullptr;
                recon = solver::pgd_reconstruct(*method.net, mask, b, pgd).image;
            }
            per_job[job].push_back(measure(method.name, mask_name, ii, ref, recon));
        }
    };

    const int threads = std::max(1, cfg.threads);
    if (threads == 1) {
        for (int job = 0; job < jobs; ++job) run_job(job);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t]() {
                for (int job = t; job < jobs; job += threads) run_job(job);
            });
        for (std::thread& th : pool) th.join();
    }

    std::vector<MetricsRecord> records;
    for (int job = 0; job < jobs; ++job)
        for (MetricsRecord& r : per_job[job]) records.push_back(std::move(r));

    // aggregate rows per (method, mask), in first-appearance order
    std::vector<std::pair<std::string, std::string>> groups;
    for (const MetricsRecord& r : records) {
        const std::pair<std::string, std::string> key{r.method, r.mask};
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    std::vector<MetricsRecord> aggregates;
    for (const auto& [method, mask_name] : groups) {
        std::vector<const MetricsRecord*> rows;
        for (const MetricsRecord& r : records)
            if (r.method == method && r.mask == mask_name) rows.push_back(&r);
        auto mean_std = [&](auto pick) {
            double mean = 0.0;
            for (const MetricsRecord* r : rows) mean += pick(*r);
            mean /= static_cast<double>(rows.size());
            double var = 0.0;
            for (const MetricsRecord* r : rows) {
                const double d = pick(*r) - mean;
                var += d * d;
            }
            var /= static_cast<double>(rows.size());
            return std::pair<double, double>{mean, std::sqrt(var)};
        };
        MetricsRecord agg;
        agg.method = method;
        agg.mask = mask_name;
        agg.image_id = -1;
        agg.aggregate = true;
        std::tie(agg.nmse, agg.nmse_std) = mean_std([](const MetricsRecord& r) { return r.nmse; });
        std::tie(agg.psnr_db, agg.psnr_std) =
            mean_std([](const MetricsRecord& r) { return r.psnr_db; });
        std::tie(agg.ssim, agg.ssim_std) = mean_std([](const MetricsRecord& r) { return r.ssim; });
        aggregates.push_back(std::move(agg));
    }
    for (MetricsRecord& agg : aggregates) records.push_back(std::move(agg));
    return records;
}

}  // namespace clear::eval
