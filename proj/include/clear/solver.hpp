#pragma once

#include <functional>
#include <vector>

#include "clear/forward_model.hpp"
#include "clear/icnn.hpp"
#include "clear/tensor.hpp"

// Projected subgradient descent: a subgradient step on the regularizer
// followed by exact projection onto {x : Ax = b}. The loop is generic over
// (subgradient, projection) so the low-dimensional theory instances run
// through the same machinery as image reconstruction.

namespace clear::solver {

enum class Schedule { Constant, Harmonic, Sqrt };

const char* schedule_name(Schedule s);
Schedule schedule_from_name(const std::string& name);

struct PGDConfig {
    int max_iters = 100;
    Schedule schedule = Schedule::Harmonic;
    double c = 0.1;  // schedule constant
    double early_stop = 0.0;  // stop when ||x_i - x_{i-1}|| < this; 0 disables
    bool record_trace = true;
    const Tensor* ground_truth = nullptr;  // enables the PSNR column
};

double step_size(const PGDConfig& cfg, int i);

using GradFn = std::function<Tensor(const Tensor&)>;
using ProjectFn = std::function<Tensor(const Tensor&)>;
using StepCallback = std::function<void(int iter, const Tensor& x, double step)>;

// Runs max_iters steps x <- project(x - t_i * subgrad(x)) from x0,
// invoking on_iter after each projection. Throws on a non-finite iterate.
Tensor pgd_minimize(Tensor x0, const PGDConfig& cfg, const GradFn& subgrad,
                    const ProjectFn& project, const StepCallback& on_iter = nullptr);

struct IterRecord {
    int iter = 0;
    double phi = 0.0;
    double residual = 0.0;
    double psnr = 0.0;  // NaN when no ground truth was supplied
};

struct ReconResult {
    Tensor image;
    std::vector<IterRecord> trace;
    int iterations = 0;
    bool diverged = false;  // non-finite iterate; trace holds steps up to failure
};

// Algorithm: x0 = zero-filled reconstruction, then PGD under the trained
// regularizer. Every post-projection iterate satisfies Ax = b exactly.
ReconResult pgd_reconstruct(const icnn::ConvexNet& net, const fm::SamplingMask& mask,
                            const fm::Measurement& b, const PGDConfig& cfg);

// Diagnostic penalized objective ||Ax-b||^2 + lambda * phi(x). The solver
// itself minimizes phi subject to Ax = b.
double objective_value(const icnn::ConvexNet& net, const fm::SamplingMask& mask,
                       const fm::Measurement& b, const Tensor& x, double lambda);

}  // namespace clear::solver
