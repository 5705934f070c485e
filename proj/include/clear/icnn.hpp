#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "clear/autodiff.hpp"
#include "clear/tensor.hpp"

// Input-convex networks. Convexity comes from the standard composition
// argument: the first (unconstrained) layer is affine in x, every later
// layer combines earlier outputs with non-negative weights, and all
// activations are convex and non-decreasing. clip_weights re-establishes
// the sign constraint after each optimizer step.

namespace clear::icnn {

enum class Mode { CLEAR, UNCLEAR };

const char* mode_name(Mode m);

struct ClipMask {
    bool w = false;
    bool b = false;  // biases stay unconstrained; kept for completeness
};

struct ConvexNet {
    ad::NetSpec spec;
    ad::ParamSet params;
    std::vector<ClipMask> clip_mask;
    Mode mode = Mode::CLEAR;
    std::vector<int> input_shape;
};

// Image-domain architecture: one unconstrained conv block, six residual
// blocks with sign-constrained convs, average pooling after every block
// except the last, then a constrained linear head to a scalar.
struct ArchSpec {
    int channels = 2;
    int height = 32;
    int width = 32;
    std::array<int, 6> widths = {8, 8, 16, 16, 32, 32};
    // Three-conv residual variant; mandatory wherever the width changes.
    std::array<bool, 6> three_conv = {false, false, true, false, true, false};
    std::array<bool, 6> pool = {true, true, true, true, true, false};
    double slope = 0.2;
};

// Vector-domain variant for the low-dimensional theory checks: first
// linear layer unconstrained, the rest constrained, leaky-relu between.
struct MlpSpec {
    int input_dim = 2;
    std::vector<int> hidden = {32, 32};
    double slope = 0.2;
};

// Tagged wrapper serialized into checkpoints as one line of text.
struct ArchDesc {
    enum class Family { Conv, Mlp };
    Family family = Family::Conv;
    ArchSpec conv;
    MlpSpec mlp;
};

std::string arch_to_text(const ArchDesc& desc);
ArchDesc arch_from_text(const std::string& text);

ConvexNet build(const ArchSpec& arch, Mode mode, std::uint64_t seed);
ConvexNet build_mlp(const MlpSpec& arch, Mode mode, std::uint64_t seed);
ConvexNet build_desc(const ArchDesc& desc, Mode mode, std::uint64_t seed);

double forward(const ConvexNet& net, const Tensor& x);

// max(p, 0) on every clip-masked parameter. Returns false (and leaves the
// net untouched) in UNCLEAR mode.
bool clip_weights(ConvexNet& net);

struct ConvexityReport {
    int violations = 0;
    double max_violation = 0.0;  // worst positive midpoint excess, 0 if none
};

// Samples n_pairs standard-normal (x, y) and tests
// phi((x+y)/2) <= (phi(x)+phi(y))/2 + tol.
ConvexityReport check_midpoint_convexity(const ConvexNet& net, int n_pairs,
                                         double tol, std::uint64_t seed);

Tensor input_gradient(const ConvexNet& net, const Tensor& x);

std::size_t param_count(const ConvexNet& net);

}  // namespace clear::icnn
