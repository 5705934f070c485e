#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clear/tensor.hpp"

// Reverse-mode differentiation for a closed op set: the layer kinds the
// network needs (conv2d, linear, leaky-relu, relu, avg-pool, skip-sum,
// flatten) plus elementwise square, sum, mean and scaling. Networks are a
// flat list of LayerSpec; each layer reads one earlier output (skip-sum
// reads two), so residual wiring is expressible without a graph compiler.
//
// Everything here is pure given immutable parameters; evaluations of the
// same net on different inputs can run concurrently.

namespace clear::ad {

enum class Op {
    Conv2d,
    Linear,
    LeakyRelu,
    Relu,
    AvgPool,
    SkipSum,
    Flatten,
    Square,
    Sum,
    Mean,
    Scale,
};

const char* op_name(Op op);

struct LayerSpec {
    // Source wiring: index of the layer whose output feeds this one.
    // kPrev means "previous layer", kInput the network input.
    static constexpr int kPrev = -2;
    static constexpr int kInput = -1;

    Op op;
    int out_ch = 0;       // conv2d
    int ksize = 0;        // conv2d
    int stride = 1;       // conv2d
    int pad = 0;          // conv2d
    int out_dim = 0;      // linear
    double slope = 0.2;   // leaky-relu, in (0,1)
    int pool = 2;         // avg-pool window == stride
    double factor = 1.0;  // scale
    int src = kPrev;
    int skip_src = kPrev;  // second operand of skip-sum

    bool operator==(const LayerSpec&) const = default;
};

using NetSpec = std::vector<LayerSpec>;

struct LayerParams {
    Tensor w, b;  // empty for parameter-free layers
};
using ParamSet = std::vector<LayerParams>;

struct ShapeError : std::runtime_error {
    int layer;
    ShapeError(int layer_idx, const std::string& msg)
        : std::runtime_error("layer " + std::to_string(layer_idx) + ": " + msg),
          layer(layer_idx) {}
};

// Validates the spec against an input shape and returns every layer's
// output shape. Throws ShapeError naming the offending layer.
std::vector<std::vector<int>> infer_shapes(const NetSpec& spec,
                                           const std::vector<int>& input_shape);

// Zero-valued parameter set with the shapes the spec implies.
ParamSet make_params(const NetSpec& spec, const std::vector<int>& input_shape);

std::size_t param_count(const ParamSet& params);

// Cached activations of one forward pass. Owns the input and per-layer
// outputs; spec and params are borrowed and must outlive the trace.
struct Trace {
    const NetSpec* spec = nullptr;
    const ParamSet* params = nullptr;
    Tensor input;
    std::vector<Tensor> outs;
    double value() const;
};

double eval_forward(const NetSpec& spec, const ParamSet& params, const Tensor& input);
Trace forward_trace(const NetSpec& spec, const ParamSet& params, const Tensor& input);

struct Gradients {
    ParamSet params;
    Tensor input;
};

// d(seed * output)/d(params, input) from a cached forward.
Gradients backward(const Trace& trace, double seed = 1.0);

// Accumulating form used when several evaluations feed one loss. Either
// destination may be null.
void backward_accumulate(const Trace& trace, double seed, ParamSet* param_grads,
                         Tensor* input_grad);

// Gradient (valid subgradient at activation kinks) of the scalar output
// w.r.t. the input.
Tensor grad_input(const NetSpec& spec, const ParamSet& params, const Tensor& input);

// Scalar tape over one network: losses are built from forward evaluations
// (leaves) plus scalar arithmetic, then differentiated w.r.t. the
// parameters in one reverse sweep.
class Tape {
public:
    struct Var {
        int id = -1;
    };

    Tape(const NetSpec& spec, const ParamSet& params);

    Var eval(const Tensor& x);  // forward evaluation leaf
    Var constant(double v);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(double c, Var a);
    Var square(Var a);
    Var mean(const std::vector<Var>& vs);

    double value(Var v) const;
    ParamSet grad_params(Var root) const;

private:
    enum class NodeOp { Const, Leaf, Add, Sub, Mul, Scale, Square };
    struct Node {
        NodeOp op;
        double value;
        int a = -1, b = -1;
        double c = 0.0;  // Scale coefficient
        int trace = -1;  // Leaf
    };
    Var push(Node n);

    const NetSpec& spec_;
    const ParamSet& params_;
    std::vector<Node> nodes_;
    std::vector<Trace> traces_;
};

using LossFn = std::function<Tape::Var(Tape&)>;

// Parameter gradients of a loss composed of forward evaluations of
// (spec, params) and scalar arithmetic.
ParamSet grad_params(const ParamSet& params, const NetSpec& spec, const LossFn& loss);

// Max over coordinates of |analytic - central difference| relative to
// max(1, |analytic|, |numeric|). Input-gradient check.
double finite_difference_check(const ParamSet& params, const NetSpec& spec,
                               const Tensor& input, double step);

// Same check for parameter gradients of an arbitrary loss.
double finite_difference_check_params(const ParamSet& params, const NetSpec& spec,
                                      const LossFn& loss, double step);

}  // namespace clear::ad
