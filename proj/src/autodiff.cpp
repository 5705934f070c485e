#include "clear/autodiff.hpp"

#include <cmath>

#include "clear/kernels.hpp"

namespace clear::ad {

namespace {

int resolve(int raw, int layer) {
    return raw == LayerSpec::kPrev ? layer - 1 : raw;
}

struct ConvDims {
    int cin, h, w, hout, wout;
};

ConvDims conv_dims(const LayerSpec& l, const std::vector<int>& in_shape, int idx) {
    if (in_shape.size() != 3)
        throw ShapeError(idx, "conv2d expects CxHxW input, got " + shape_str(in_shape));
    if (l.ksize < 1 || l.stride < 1 || l.pad < 0 || l.out_ch < 1)
        throw ShapeError(idx, "conv2d hyperparameters invalid");
    ConvDims d;
    d.cin = in_shape[0];
    d.h = in_shape[1];
    d.w = in_shape[2];
    d.hout = (d.h + 2 * l.pad - l.ksize) / l.stride + 1;
    d.wout = (d.w + 2 * l.pad - l.ksize) / l.stride + 1;
    if (d.h + 2 * l.pad < l.ksize || d.w + 2 * l.pad < l.ksize)
        throw ShapeError(idx, "conv2d kernel larger than padded input");
    return d;
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::Conv2d: return "conv2d";
        case Op::Linear: return "linear";
        case Op::LeakyRelu: return "leaky-relu";
        case Op::Relu: return "relu";
        case Op::AvgPool: return "avg-pool";
        case Op::SkipSum: return "skip-sum";
        case Op::Flatten: return "flatten";
        case Op::Square: return "square";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::Scale: return "scale";
    }
    return "?";
}

std::vector<std::vector<int>> infer_shapes(const NetSpec& spec,
                                           const std::vector<int>& input_shape) {
    std::vector<std::vector<int>> shapes(spec.size());
    auto shape_of = [&](int src) -> const std::vector<int>& {
        return src == LayerSpec::kInput ? input_shape : shapes[src];
    };
    for (int i = 0; i < static_cast<int>(spec.size()); ++i) {
        const LayerSpec& l = spec[i];
        int src = resolve(l.src, i);
        if (src < LayerSpec::kInput || src >= i)
            throw ShapeError(i, "source index out of range");
        const std::vector<int>& in = shape_of(src);
        switch (l.op) {
            case Op::Conv2d: {
                ConvDims d = conv_dims(l, in, i);
                shapes[i] = {l.out_ch, d.hout, d.wout};
                break;
            }
            case Op::Linear: {
                if (in.size() != 1)
                    throw ShapeError(i, "linear expects flat input, got " + shape_str(in));
                if (l.out_dim < 1) throw ShapeError(i, "linear out_dim invalid");
                shapes[i] = {l.out_dim};
                break;
            }
            case Op::LeakyRelu: {
                if (!(l.slope > 0.0 && l.slope < 1.0))
                    throw ShapeError(i, "leaky-relu slope must lie in (0,1)");
                shapes[i] = in;
                break;
            }
            case Op::Relu:
            case Op::Square:
            case Op::Scale:
                shapes[i] = in;
                break;
            case Op::AvgPool: {
                if (in.size() != 3)
                    throw ShapeError(i, "avg-pool expects CxHxW input");
                if (l.pool < 1 || in[1] % l.pool != 0 || in[2] % l.pool != 0)
                    throw ShapeError(i, "avg-pool window must divide spatial dims");
                shapes[i] = {in[0], in[1] / l.pool, in[2] / l.pool};
                break;
            }
            case Op::SkipSum: {
                int s2 = resolve(l.skip_src, i);
                if (s2 < LayerSpec::kInput || s2 >= i)
                    throw ShapeError(i, "skip source index out of range");
                if (shape_of(s2) != in)
                    throw ShapeError(i, "skip-sum operands differ: " + shape_str(in) +
                                            " vs " + shape_str(shape_of(s2)));
                shapes[i] = in;
                break;
            }
            case Op::Flatten:
                shapes[i] = {static_cast<int>(Tensor::numel(in))};
                break;
            case Op::Sum:
            case Op::Mean:
                shapes[i] = {1};
                break;
        }
    }
    return shapes;
}

ParamSet make_params(const NetSpec& spec, const std::vector<int>& input_shape) {
    auto shapes = infer_shapes(spec, input_shape);
    ParamSet params(spec.size());
    for (int i = 0; i < static_cast<int>(spec.size()); ++i) {
        const LayerSpec& l = spec[i];
        int src = resolve(l.src, i);
        const std::vector<int>& in = src == LayerSpec::kInput ? input_shape : shapes[src];
        if (l.op == Op::Conv2d) {
            params[i].w = Tensor({l.out_ch, in[0], l.ksize, l.ksize});
            params[i].b = Tensor({l.out_ch});
        } else if (l.op == Op::Linear) {
            params[i].w = Tensor({l.out_dim, in[0]});
            params[i].b = Tensor({l.out_dim});
        }
    }
    return params;
}

std::size_t param_count(const ParamSet& params) {
    std::size_t n = 0;
    for (const LayerParams& p : params) n += p.w.size() + p.b.size();
    return n;
}

namespace {

void conv2d_forward(const LayerSpec& l, const Tensor& w, const Tensor& b,
                    const Tensor& in, Tensor& out) {
    const auto& k = kern::active();
    const int cin = in.shape[0], h = in.shape[1], wd = in.shape[2];
    const int hout = out.shape[1], wout = out.shape[2];
    const int ks = l.ksize, s = l.stride, p = l.pad;
    for (int oc = 0; oc < l.out_ch; ++oc) {
        double* oplane = out.ptr() + static_cast<std::size_t>(oc) * hout * wout;
        const double bias = b[oc];
        for (int i = 0; i < hout * wout; ++i) oplane[i] = bias;
        for (int ic = 0; ic < cin; ++ic) {
            const double* iplane = in.ptr() + static_cast<std::size_t>(ic) * h * wd;
            const double* wk =
                w.ptr() + ((static_cast<std::size_t>(oc) * cin + ic) * ks) * ks;
            for (int ky = 0; ky < ks; ++ky) {
                for (int kx = 0; kx < ks; ++kx) {
                    const double wv = wk[ky * ks + kx];
                    if (wv == 0.0) continue;
                    for (int oy = 0; oy < hout; ++oy) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= h) continue;
                        double* orow = oplane + static_cast<std::size_t>(oy) * wout;
                        const double* irow = iplane + static_cast<std::size_t>(iy) * wd;
                        if (s == 1) {
                            const int xlo = std::max(0, p - kx);
                            const int xhi = std::min(wout, wd + p - kx);
                            if (xhi > xlo)
                                k.axpy(wv, irow + xlo + kx - p, orow + xlo, xhi - xlo);
                        } else {
                            for (int ox = 0; ox < wout; ++ox) {
                                const int ix = ox * s + kx - p;
                                if (ix >= 0 && ix < wd) orow[ox] += wv * irow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward(const LayerSpec& l, const Tensor& w, const Tensor& in,
                     const Tensor& gout, Tensor* gw, Tensor* gb, Tensor* gin) {
    const auto& k = kern::active();
    const int cin = in.shape[0], h = in.shape[1], wd = in.shape[2];
    const int hout = gout.shape[1], wout = gout.shape[2];
    const int ks = l.ksize, s = l.stride, p = l.pad;
    for (int oc = 0; oc < l.out_ch; ++oc) {
        const double* gplane = gout.ptr() + static_cast<std::size_t>(oc) * hout * wout;
        if (gb) (*gb)[oc] += k.sum(gplane, static_cast<std::size_t>(hout) * wout);
        for (int ic = 0; ic < cin; ++ic) {
            const double* iplane = in.ptr() + static_cast<std::size_t>(ic) * h * wd;
            double* giplane = gin ? gin->ptr() + static_cast<std::size_t>(ic) * h * wd : nullptr;
            const std::size_t wbase = (static_cast<std::size_t>(oc) * cin + ic) *
                                      static_cast<std::size_t>(ks) * ks;
            for (int ky = 0; ky < ks; ++ky) {
                for (int kx = 0; kx < ks; ++kx) {
                    const double wv = w.ptr()[wbase + ky * ks + kx];
                    double wacc = 0.0;
                    for (int oy = 0; oy < hout; ++oy) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= h) continue;
                        const double* grow = gplane + static_cast<std::size_t>(oy) * wout;
                        const double* irow = iplane + static_cast<std::size_t>(iy) * wd;
                        if (s == 1) {
                            const int xlo = std::max(0, p - kx);
                            const int xhi = std::min(wout, wd + p - kx);
                            if (xhi <= xlo) continue;
                            if (gw) wacc += k.dot(grow + xlo, irow + xlo + kx - p, xhi - xlo);
                            if (gin)
                                k.axpy(wv, grow + xlo,
                                       giplane + static_cast<std::size_t>(iy) * wd + xlo + kx - p,
                                       xhi - xlo);
                        } else {
                            for (int ox = 0; ox < wout; ++ox) {
                                const int ix = ox * s + kx - p;
                                if (ix < 0 || ix >= wd) continue;
                                if (gw) wacc += grow[ox] * irow[ix];
                                if (gin)
                                    giplane[static_cast<std::size_t>(iy) * wd + ix] +=
                                        wv * grow[ox];
                            }
                        }
                    }
                    if (gw) gw->ptr()[wbase + ky * ks + kx] += wacc;
                }
            }
        }
    }
}

void avgpool_forward(int p, const Tensor& in, Tensor& out) {
    const int c = in.shape[0], h = in.shape[1], w = in.shape[2];
    const int ho = h / p, wo = w / p;
    const double inv = 1.0 / (p * p);
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx)
                        acc += in.at(ch, oy * p + dy, ox * p + dx);
                out.at(ch, oy, ox) = acc * inv;
            }
    (void)w;
}

void avgpool_backward(int p, const Tensor& gout, Tensor& gin) {
    const int c = gout.shape[0], ho = gout.shape[1], wo = gout.shape[2];
    const double inv = 1.0 / (p * p);
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const double g = gout.at(ch, oy, ox) * inv;
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx)
                        gin.at(ch, oy * p + dy, ox * p + dx) += g;
            }
}

}  // namespace

double Trace::value() const {
    return outs.back().data[0];
}

Trace forward_trace(const NetSpec& spec, const ParamSet& params, const Tensor& input) {
    require_finite(input, "forward input");
    if (params.size() != spec.size())
        throw std::invalid_argument("forward: params do not match spec");
    auto shapes = infer_shapes(spec, input.shape);
    if (shapes.empty() || Tensor::numel(shapes.back()) != 1)
        throw ShapeError(static_cast<int>(spec.size()) - 1, "network output is not scalar");

    Trace t;
    t.spec = &spec;
    t.params = &params;
    t.input = input;
    t.outs.resize(spec.size());
    const auto& k = kern::active();

    auto src_of = [&](int raw, int i) -> const Tensor& {
        int s = resolve(raw, i);
        return s == LayerSpec::kInput ? t.input : t.outs[s];
    };

    for (int i = 0; i < static_cast<int>(spec.size()); ++i) {
        const LayerSpec& l = spec[i];
        const Tensor& in = src_of(l.src, i);
        Tensor out(shapes[i]);
        switch (l.op) {
            case Op::Conv2d:
                conv2d_forward(l, params[i].w, params[i].b, in, out);
                break;
            case Op::Linear: {
                const int n = in.shape[0];
                for (int o = 0; o < l.out_dim; ++o)
                    out[o] = params[i].b[o] +
                             k.dot(params[i].w.ptr() + static_cast<std::size_t>(o) * n,
                                   in.ptr(), n);
                break;
            }
            case Op::LeakyRelu:
                k.leaky_relu(in.ptr(), out.ptr(), in.size(), l.slope);
                break;
            case Op::Relu:
                k.leaky_relu(in.ptr(), out.ptr(), in.size(), 0.0);
                break;
            case Op::AvgPool:
                avgpool_forward(l.pool, in, out);
                break;
            case Op::SkipSum:
                k.vadd(in.ptr(), src_of(l.skip_src, i).ptr(), out.ptr(), in.size());
                break;
            case Op::Flatten:
                out.data = in.data;
                break;
            case Op::Square:
                for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] * in[j];
                break;
            case Op::Sum:
                out[0] = k.sum(in.ptr(), in.size());
                break;
            case Op::Mean:
                out[0] = k.sum(in.ptr(), in.size()) / static_cast<double>(in.size());
                break;
            case Op::Scale:
                out.data = in.data;
                k.scale(l.factor, out.ptr(), out.size());
                break;
        }
        t.outs[i] = std::move(out);
    }
    return t;
}

double eval_forward(const NetSpec& spec, const ParamSet& params, const Tensor& input) {
    return forward_trace(spec, params, input).value();
}

void backward_accumulate(const Trace& t, double seed, ParamSet* param_grads,
                         Tensor* input_grad) {
    const NetSpec& spec = *t.spec;
    const ParamSet& params = *t.params;
    const auto& k = kern::active();
    const int L = static_cast<int>(spec.size());

    std::vector<Tensor> gs(L);
    for (int i = 0; i < L; ++i) gs[i] = Tensor(t.outs[i].shape);
    Tensor gin_local(t.input.shape);
    gs[L - 1][0] = seed;

    auto src_tensor = [&](int raw, int i) -> const Tensor& {
        int s = resolve(raw, i);
        return s == LayerSpec::kInput ? t.input : t.outs[s];
    };
    auto src_grad = [&](int raw, int i) -> Tensor& {
        int s = resolve(raw, i);
        return s == LayerSpec::kInput ? gin_local : gs[s];
    };

    for (int i = L - 1; i >= 0; --i) {
        const LayerSpec& l = spec[i];
        const Tensor& gout = gs[i];
        const Tensor& in = src_tensor(l.src, i);
        Tensor& gin = src_grad(l.src, i);
        switch (l.op) {
            case Op::Conv2d:
                conv2d_backward(l, params[i].w, in, gout,
                                param_grads ? &(*param_grads)[i].w : nullptr,
                                param_grads ? &(*param_grads)[i].b : nullptr, &gin);
                break;
            case Op::Linear: {
                const int n = in.shape[0];
                for (int o = 0; o < l.out_dim; ++o) {
                    const double g = gout[o];
                    if (param_grads) {
                        (*param_grads)[i].b[o] += g;
                        k.axpy(g, in.ptr(),
                               (*param_grads)[i].w.ptr() + static_cast<std::size_t>(o) * n, n);
                    }
                    k.axpy(g, params[i].w.ptr() + static_cast<std::size_t>(o) * n,
                           gin.ptr(), n);
                }
                break;
            }
            case Op::LeakyRelu:
                k.leaky_relu_grad(in.ptr(), gout.ptr(), gin.ptr(), in.size(), l.slope);
                break;
            case Op::Relu:
                k.leaky_relu_grad(in.ptr(), gout.ptr(), gin.ptr(), in.size(), 0.0);
                break;
            case Op::AvgPool:
                avgpool_backward(l.pool, gout, gin);
                break;
            case Op::SkipSum:
                k.axpy(1.0, gout.ptr(), gin.ptr(), gout.size());
                k.axpy(1.0, gout.ptr(), src_grad(l.skip_src, i).ptr(), gout.size());
                break;
            case Op::Flatten:
                k.axpy(1.0, gout.ptr(), gin.ptr(), gout.size());
                break;
            case Op::Square:
                for (std::size_t j = 0; j < in.size(); ++j)
                    gin[j] += gout[j] * 2.0 * in[j];
                break;
            case Op::Sum:
                for (std::size_t j = 0; j < in.size(); ++j) gin[j] += gout[0];
                break;
            case Op::Mean: {
                const double g = gout[0] / static_cast<double>(in.size());
                for (std::size_t j = 0; j < in.size(); ++j) gin[j] += g;
                break;
            }
            case Op::Scale:
                k.axpy(l.factor, gout.ptr(), gin.ptr(), gout.size());
                break;
        }
    }
    if (input_grad) k.axpy(1.0, gin_local.ptr(), input_grad->ptr(), gin_local.size());
}

Gradients backward(const Trace& t, double seed) {
    Gradients g;
    g.params = ParamSet(t.params->size());
    for (std::size_t i = 0; i < t.params->size(); ++i) {
        if ((*t.params)[i].w.size()) g.params[i].w = Tensor((*t.params)[i].w.shape);
        if ((*t.params)[i].b.size()) g.params[i].b = Tensor((*t.params)[i].b.shape);
    }
    g.input = Tensor(t.input.shape);
    backward_accumulate(t, seed, &g.params, &g.input);
    return g;
}

Tensor grad_input(const NetSpec& spec, const ParamSet& params, const Tensor& input) {
    Trace t = forward_trace(spec, params, input);
    Tensor g(input.shape);
    backward_accumulate(t, 1.0, nullptr, &g);
    return g;
}

Tape::Tape(const NetSpec& spec, const ParamSet& params) : spec_(spec), params_(params) {}

Tape::Var Tape::push(Node n) {
    nodes_.push_back(n);
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::eval(const Tensor& x) {
    traces_.push_back(forward_trace(spec_, params_, x));
    Node n{NodeOp::Leaf, traces_.back().value()};
    n.trace = static_cast<int>(traces_.size()) - 1;
    return push(n);
}

Tape::Var Tape::constant(double v) { return push(Node{NodeOp::Const, v}); }

Tape::Var Tape::add(Var a, Var b) {
    Node n{NodeOp::Add, nodes_[a.id].value + nodes_[b.id].value, a.id, b.id};
    return push(n);
}

Tape::Var Tape::sub(Var a, Var b) {
    Node n{NodeOp::Sub, nodes_[a.id].value - nodes_[b.id].value, a.id, b.id};
    return push(n);
}

Tape::Var Tape::mul(Var a, Var b) {
    Node n{NodeOp::Mul, nodes_[a.id].value * nodes_[b.id].value, a.id, b.id};
    return push(n);
}

Tape::Var Tape::scale(double c, Var a) {
    Node n{NodeOp::Scale, c * nodes_[a.id].value, a.id};
    n.c = c;
    return push(n);
}

Tape::Var Tape::square(Var a) {
    Node n{NodeOp::Square, nodes_[a.id].value * nodes_[a.id].value, a.id};
    return push(n);
}

Tape::Var Tape::mean(const std::vector<Var>& vs) {
    if (vs.empty()) throw std::invalid_argument("tape: mean of empty set");
    Var acc = vs[0];
    for (std::size_t i = 1; i < vs.size(); ++i) acc = add(acc, vs[i]);
    return scale(1.0 / static_cast<double>(vs.size()), acc);
}

double Tape::value(Var v) const { return nodes_[v.id].value; }

ParamSet Tape::grad_params(Var root) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[root.id] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        const Node& n = nodes_[i];
        const double a = adj[i];
        if (a == 0.0) continue;
        switch (n.op) {
            case NodeOp::Const:
            case NodeOp::Leaf:
                break;
            case NodeOp::Add:
                adj[n.a] += a;
                adj[n.b] += a;
                break;
            case NodeOp::Sub:
                adj[n.a] += a;
                adj[n.b] -= a;
                break;
            case NodeOp::Mul:
                adj[n.a] += a * nodes_[n.b].value;
                adj[n.b] += a * nodes_[n.a].value;
                break;
            case NodeOp::Scale:
                adj[n.a] += a * n.c;
                break;
            case NodeOp::Square:
                adj[n.a] += a * 2.0 * nodes_[n.a].value;
                break;
        }
    }
    ParamSet grads(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].w.size()) grads[i].w = Tensor(params_[i].w.shape);
        if (params_[i].b.size()) grads[i].b = Tensor(params_[i].b.shape);
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].op == NodeOp::Leaf && adj[i] != 0.0)
            backward_accumulate(traces_[nodes_[i].trace], adj[i], &grads, nullptr);
    }
    return grads;
}

ParamSet grad_params(const ParamSet& params, const NetSpec& spec, const LossFn& loss) {
    Tape tape(spec, params);
    return tape.grad_params(loss(tape));
}

namespace {

double rel_err(double analytic, double numeric) {
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

}  // namespace

double finite_difference_check(const ParamSet& params, const NetSpec& spec,
                               const Tensor& input, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step must be > 0");
    Tensor g = grad_input(spec, params, input);
    Tensor x = input;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double fp = eval_forward(spec, params, x);
        x[i] = keep - step;
        const double fm = eval_forward(spec, params, x);
        x[i] = keep;
        worst = std::max(worst, rel_err(g[i], (fp - fm) / (2.0 * step)));
    }
    return worst;
}

double finite_difference_check_params(const ParamSet& params, const NetSpec& spec,
                                      const LossFn& loss, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_difference_check_params: step must be > 0");
    ParamSet analytic = grad_params(params, spec, loss);
    ParamSet probe = params;
    auto loss_value = [&]() {
        Tape tape(spec, probe);
        return tape.value(loss(tape));
    };
    double worst = 0.0;
    for (std::size_t li = 0; li < probe.size(); ++li) {
        for (Tensor* t : {&probe[li].w, &probe[li].b}) {
            Tensor* ga = t == &probe[li].w ? &analytic[li].w : &analytic[li].b;
            for (std::size_t j = 0; j < t->size(); ++j) {
                const double keep = (*t)[j];
                (*t)[j] = keep + step;
                const double fp = loss_value();
                (*t)[j] = keep - step;
                const double fm = loss_value();
                (*t)[j] = keep;
                worst = std::max(worst, rel_err((*ga)[j], (fp - fm) / (2.0 * step)));
            }
        }
    }
    return worst;
}

}  // namespace clear::ad
