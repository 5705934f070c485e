#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clear/autodiff.hpp"
#include "clear/icnn.hpp"
#include "clear/rng.hpp"
#include "clear/tensor.hpp"

// Adversarial training of the regularizer. Real samples are pushed down,
// generated samples pushed up, with a gradient penalty holding the slope
// near 1. Modes share every line of the loss path and differ only in how
// the generated sample is produced: CLEAR and UNCLEAR walk the latent
// descent x_k = x_{k-1} - eta * grad_phi + noise, AR just adds the initial
// noise; UNCLEAR additionally skips weight clipping.

namespace clear::train {

enum class Mode { CLEAR, UNCLEAR, AR };

const char* mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct TrainConfig {
    icnn::ArchDesc arch;
    Mode mode = Mode::CLEAR;
    int latent_steps = 10;           // t in the latent walk
    double latent_step_size = 0.05;  // eta
    double init_noise_std = 0.3;     // delta_0
    double walk_noise_std = 0.01;    // delta_k
    double gp_weight = 10.0;         // lambda
    double gp_eps = 1e-3;            // directional-difference step
    int batch_size = 8;
    int epochs = 20;
    double lr = 1e-4;                // optimizer step on theta
    std::uint64_t seed = 0;
};

std::string config_text(const TrainConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double real_mean = 0.0;
    double gen_mean = 0.0;
    double penalty = 0.0;
};

struct Checkpoint {
    std::uint32_t version = 1;
    icnn::ArchDesc arch;
    Mode mode = Mode::CLEAR;
    int epoch = 0;
    std::uint64_t seed = 0;
    std::string config_echo;
    struct LayerBlob {
        std::vector<float> w, b;
    };
    std::vector<LayerBlob> layers;  // parameters quantized to f32
};

Checkpoint make_checkpoint(const icnn::ConvexNet& net, const TrainConfig& cfg, int epoch);
icnn::ConvexNet net_from_checkpoint(const Checkpoint& ckpt);

// Eq-style latent walk: x_0 = x+ + noise(delta_0), then latent_steps of
// x_k = x_{k-1} - eta * grad_phi(x_{k-1}) + noise(delta_k). Net untouched.
Tensor latent_optimize(const icnn::ConvexNet& net, const Tensor& x_plus,
                       const TrainConfig& cfg, Rng& rng);
Tensor latent_optimize(const icnn::ConvexNet& net, const Tensor& x_plus,
                       const TrainConfig& cfg, std::uint64_t seed);

// x* per the configured mode (latent walk or noise-only for AR).
Tensor generate_sample(const icnn::ConvexNet& net, const Tensor& x_plus,
                       const TrainConfig& cfg, Rng& rng);

// Mean over points of (D - 1)^2 where D is the central directional
// difference of phi along the (stop-gradient) normalized input gradient.
// Differentiable w.r.t. theta through the two forward evaluations.
ad::Tape::Var gradient_penalty_var(ad::Tape& tape, const icnn::ConvexNet& net,
                                   const std::vector<Tensor>& points, double eps);
double gradient_penalty(const icnn::ConvexNet& net, const std::vector<Tensor>& points,
                        double eps);

struct LossParts {
    ad::Tape::Var real_mean, gen_mean, penalty;  // penalty stays id -1 without gp term
};

ad::Tape::Var clear_loss_var(ad::Tape& tape, const icnn::ConvexNet& net,
                             const std::vector<Tensor>& reals,
                             const std::vector<Tensor>& generateds,
                             const std::vector<Tensor>& gp_points, double lambda,
                             double gp_eps = 1e-3, LossParts* parts = nullptr);
double clear_loss(const icnn::ConvexNet& net, const std::vector<Tensor>& reals,
                  const std::vector<Tensor>& generateds,
                  const std::vector<Tensor>& gp_points, double lambda,
                  double gp_eps = 1e-3);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStats> stats;
};

TrainResult train(const std::vector<Tensor>& dataset, const TrainConfig& cfg);

}  // namespace clear::train
