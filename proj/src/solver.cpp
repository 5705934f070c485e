#include "clear/solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "clear/metrics.hpp"

namespace clear::solver {

const char* schedule_name(Schedule s) {
    switch (s) {
        case Schedule::Constant: return "constant";
        case Schedule::Harmonic: return "harmonic";
        case Schedule::Sqrt: return "sqrt";
    }
    return "?";
}

Schedule schedule_from_name(const std::string& name) {
    if (name == "constant") return Schedule::Constant;
    if (name == "harmonic") return Schedule::Harmonic;
    if (name == "sqrt") return Schedule::Sqrt;
    throw std::invalid_argument("unknown schedule '" + name + "'");
}

double step_size(const PGDConfig& cfg, int i) {
    if (i < 0) throw std::invalid_argument("step_size: negative iteration");
    switch (cfg.schedule) {
        case Schedule::Constant: return cfg.c;
        case Schedule::Harmonic: return cfg.c / (i + 1);
        case Schedule::Sqrt: return cfg.c / std::sqrt(static_cast<double>(i + 1));
    }
    return cfg.c;
}

Tensor pgd_minimize(Tensor x0, const PGDConfig& cfg, const GradFn& subgrad,
                    const ProjectFn& project, const StepCallback& on_iter) {
    if (cfg.max_iters < 1) throw std::invalid_argument("pgd: max_iters must be >= 1");
    if (!(cfg.c >= 0.0)) throw std::invalid_argument("pgd: schedule constant must be >= 0");
    Tensor x = std::move(x0);
    for (int i = 0; i < cfg.max_iters; ++i) {
        const double t = step_size(cfg, i);
        Tensor g = subgrad(x);
        if (!g.same_shape(x)) throw std::invalid_argument("pgd: subgradient shape mismatch");
        Tensor half = x;
        axpy_inplace(half, -t, g);
        Tensor next = project(half);
        if (!all_finite(next))
            throw std::runtime_error("pgd: non-finite iterate at iteration " +
                                     std::to_string(i + 1));
        double move = 0.0;
        if (cfg.early_stop > 0.0) {
            Tensor diff = next - x;
            move = norm2(diff);
        }
        x = std::move(next);
        if (on_iter) on_iter(i + 1, x, t);
        if (cfg.early_stop > 0.0 && move < cfg.early_stop) break;
    }
    return x;
}

ReconResult pgd_reconstruct(const icnn::ConvexNet& net, const fm::SamplingMask& mask,
                            const fm::Measurement& b, const PGDConfig& cfg) {
    if (!fm::support_consistent(mask, b))
        throw std::invalid_argument("pgd_reconstruct: measurement nonzero off the mask support");

    Tensor gt_mag;
    double gt_peak = 0.0;
    if (cfg.ground_truth) {
        gt_mag = metrics::magnitude_image(*cfg.ground_truth);
        for (std::size_t i = 0; i < gt_mag.size(); ++i) gt_peak = std::max(gt_peak, gt_mag[i]);
        if (gt_peak <= 0.0) gt_peak = 1.0;
    }

    ReconResult result;
    auto record = [&](int iter, const Tensor& x) {
        if (!cfg.record_trace) return;
        IterRecord rec;
        rec.iter = iter;
        rec.phi = icnn::forward(net, x);
        rec.residual = fm::residual_norm(mask, b, x);
        rec.psnr = cfg.ground_truth
                       ? metrics::psnr(gt_mag, metrics::magnitude_image(x), gt_peak)
                       : std::numeric_limits<double>::quiet_NaN();
        result.trace.push_back(rec);
    };

    Tensor x0 = fm::apply_A_adjoint(mask, b);
    Tensor last = x0;
    record(0, x0);
    try {
        result.image = pgd_minimize(
            std::move(x0), cfg, [&](const Tensor& x) { return icnn::input_gradient(net, x); },
            [&](const Tensor& x) { return fm::project_data_consistency(mask, b, x); },
            [&](int iter, const Tensor& x, double) {
                result.iterations = iter;
                last = x;
                record(iter, x);
            });
    } catch (const std::runtime_error&) {
        result.diverged = true;
        result.image = std::move(last);
    }
    return result;
}

double objective_value(const icnn::ConvexNet& net, const fm::SamplingMask& mask,
                       const fm::Measurement& b, const Tensor& x, double lambda) {
    const double r = fm::residual_norm(mask, b, x);
    return r * r + lambda * icnn::forward(net, x);
}

}  // namespace clear::solver
