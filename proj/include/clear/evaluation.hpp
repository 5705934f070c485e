#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clear/forward_model.hpp"
#include "clear/metrics.hpp"
#include "clear/solver.hpp"
#include "clear/tensor.hpp"
#include "clear/training.hpp"

// Comparative evaluation at desk scale: synthetic phantoms, the TV/ROF
// baseline, and a suite runner producing per-image and aggregate metric
// records for zero-filled / TV / learned reconstructions.

namespace clear::eval {

enum class PhantomKind { Ellipses, PiecewiseConstant, SheppLoganLike };

const char* phantom_kind_name(PhantomKind k);
PhantomKind phantom_kind_from_name(const std::string& name);

// Real-valued image in [0,1] with a zero imaginary channel.
Tensor make_phantom(PhantomKind kind, int size, std::uint64_t seed);

// Isotropic TV (forward differences, Neumann boundary) of one channel.
double tv_value(const Tensor& img);

// Proximal gradient on ||Ax-b||^2 + weight*TV(x), channel-wise Chambolle
// dual prox with warm start. Monotone in the objective: a non-improving
// step ends the loop.
Tensor tv_reconstruct(const fm::SamplingMask& mask, const fm::Measurement& b, double weight,
                      int iters);

double tv_objective(const fm::SamplingMask& mask, const fm::Measurement& b, const Tensor& x,
                    double weight);

struct MetricsRecord {
    std::string method;
    std::string mask;
    int image_id = 0;  // -1 on aggregate rows
    double nmse = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    bool aggregate = false;
    double nmse_std = 0.0, psnr_std = 0.0, ssim_std = 0.0;  // aggregate rows only
};

struct EvalConfig {
    std::vector<fm::SamplingMask> masks;
    double noise_level = 0.0;
    solver::PGDConfig pgd;
    double tv_weight = 0.02;
    int tv_iters = 60;
    int threads = 1;
    std::uint64_t seed = 0;
};

// Runs every available method on every (mask, image) pair. Learned methods
// come from the checkpoints (keyed by their training mode); duplicates of
// a mode are rejected. Per-image rows come first (deterministic order),
// aggregate mean/std rows after.
std::vector<MetricsRecord> evaluate_suite(const std::vector<train::Checkpoint>& checkpoints,
                                          const std::vector<Tensor>& dataset,
                                          const EvalConfig& cfg);

}  // namespace clear::eval
