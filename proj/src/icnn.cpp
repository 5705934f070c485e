#include "clear/icnn.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "clear/kernels.hpp"
#include "clear/rng.hpp"

namespace clear::icnn {

namespace {

using ad::LayerSpec;
using ad::Op;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Draws parameters in layer order, weights before biases. Constrained
// weights are folded into [0, inf) with scale 1/fan_in so that sums over
// a whole fan-in stay O(1); unconstrained weights use 1/sqrt(fan_in).
void init_params(ConvexNet& net, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = 0; i < net.spec.size(); ++i) {
        Tensor& w = net.params[i].w;
        if (w.size() == 0) continue;
        const std::size_t fan_in = w.size() / static_cast<std::size_t>(w.shape[0]);
        if (net.clip_mask[i].w) {
            const double s = 1.0 / static_cast<double>(fan_in);
            for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::abs(rng.normal(0.0, s));
        } else {
            const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.normal(0.0, s);
        }
        // biases start at zero
    }
}

ConvexNet finish_build(ad::NetSpec spec, std::vector<ClipMask> masks,
                       std::vector<int> input_shape, Mode mode, std::uint64_t seed) {
    ConvexNet net;
    net.spec = std::move(spec);
    net.clip_mask = std::move(masks);
    net.input_shape = std::move(input_shape);
    net.mode = mode;
    net.params = ad::make_params(net.spec, net.input_shape);
    init_params(net, seed);
    return net;
}

}  // namespace

const char* mode_name(Mode m) { return m == Mode::CLEAR ? "CLEAR" : "UNCLEAR"; }

ConvexNet build(const ArchSpec& arch, Mode mode, std::uint64_t seed) {
    if (arch.channels < 1 || arch.height < 1 || arch.width < 1)
        throw std::invalid_argument("arch: input shape invalid");
    if (!(arch.slope > 0.0 && arch.slope < 1.0))
        throw std::invalid_argument("arch: slope must lie in (0,1)");
    for (int w : arch.widths)
        if (w < 1) throw std::invalid_argument("arch: widths must be positive");

    ad::NetSpec spec;
    std::vector<ClipMask> masks;
    auto add = [&](LayerSpec l, bool clip_w) {
        spec.push_back(l);
        masks.push_back(ClipMask{clip_w, false});
        return static_cast<int>(spec.size()) - 1;
    };
    auto conv = [&](int out_ch, int src, bool clip_w) {
        LayerSpec l{Op::Conv2d};
        l.out_ch = out_ch;
        l.ksize = 3;
        l.pad = 1;
        l.src = src;
        return add(l, clip_w);
    };
    auto lrelu = [&]() {
        LayerSpec l{Op::LeakyRelu};
        l.slope = arch.slope;
        return add(l, false);
    };

    conv(arch.widths[0], LayerSpec::kInput, false);
    int block_in = lrelu();
    int in_ch = arch.widths[0];
    for (int i = 0; i < 6; ++i) {
        const int w = arch.widths[i];
        if (w != in_ch && !arch.three_conv[i])
            throw std::invalid_argument("arch: residual block " + std::to_string(i) +
                                        " changes width and needs the 3-conv variant");
        int skip_from;
        if (arch.three_conv[i]) {
            conv(w, block_in, true);
            skip_from = lrelu();
            conv(w, skip_from, true);
            lrelu();
            conv(w, LayerSpec::kPrev, true);
        } else {
            skip_from = block_in;
            conv(w, block_in, true);
            lrelu();
            conv(w, LayerSpec::kPrev, true);
        }
        LayerSpec sum{Op::SkipSum};
        sum.skip_src = skip_from;
        add(sum, false);
        block_in = lrelu();
        if (arch.pool[i]) {
            LayerSpec p{Op::AvgPool};
            p.pool = 2;
            block_in = add(p, false);
        }
        in_ch = w;
    }
    add(LayerSpec{Op::Flatten}, false);
    LayerSpec head{Op::Linear};
    head.out_dim = 1;
    add(head, true);

    return finish_build(std::move(spec), std::move(masks),
                        {arch.channels, arch.height, arch.width}, mode, seed);
}

ConvexNet build_mlp(const MlpSpec& arch, Mode mode, std::uint64_t seed) {
    if (arch.input_dim < 1) throw std::invalid_argument("arch: input_dim invalid");
    if (!(arch.slope > 0.0 && arch.slope < 1.0))
        throw std::invalid_argument("arch: slope must lie in (0,1)");
    for (int h : arch.hidden)
        if (h < 1) throw std::invalid_argument("arch: hidden widths must be positive");

    ad::NetSpec spec;
    std::vector<ClipMask> masks;
    auto add = [&](LayerSpec l, bool clip_w) {
        spec.push_back(l);
        masks.push_back(ClipMask{clip_w, false});
    };
    bool first = true;
    for (int h : arch.hidden) {
        LayerSpec l{Op::Linear};
        l.out_dim = h;
        add(l, !first);
        LayerSpec a{Op::LeakyRelu};
        a.slope = arch.slope;
        add(a, false);
        first = false;
    }
    LayerSpec head{Op::Linear};
    head.out_dim = 1;
    add(head, !first);

    return finish_build(std::move(spec), std::move(masks), {arch.input_dim}, mode, seed);
}

ConvexNet build_desc(const ArchDesc& desc, Mode mode, std::uint64_t seed) {
    return desc.family == ArchDesc::Family::Conv ? build(desc.conv, mode, seed)
                                                 : build_mlp(desc.mlp, mode, seed);
}

double forward(const ConvexNet& net, const Tensor& x) {
    return ad::eval_forward(net.spec, net.params, x);
}

bool clip_weights(ConvexNet& net) {
    if (net.mode != Mode::CLEAR) return false;
    const auto& k = kern::active();
    for (std::size_t i = 0; i < net.spec.size(); ++i) {
        if (net.clip_mask[i].w && net.params[i].w.size())
            k.max0(net.params[i].w.ptr(), net.params[i].w.size());
        if (net.clip_mask[i].b && net.params[i].b.size())
            k.max0(net.params[i].b.ptr(), net.params[i].b.size());
    }
    return true;
}

ConvexityReport check_midpoint_convexity(const ConvexNet& net, int n_pairs, double tol,
                                         std::uint64_t seed) {
    if (n_pairs < 1) throw std::invalid_argument("check_midpoint_convexity: n_pairs < 1");
    if (tol < 0.0) throw std::invalid_argument("check_midpoint_convexity: tol < 0");
    Rng rng(seed);
    ConvexityReport rep;
    Tensor x(net.input_shape), y(net.input_shape), mid(net.input_shape);
    for (int p = 0; p < n_pairs; ++p) {
        rng.fill_normal(x, 1.0);
        rng.fill_normal(y, 1.0);
        for (std::size_t j = 0; j < mid.size(); ++j) mid[j] = 0.5 * (x[j] + y[j]);
        const double fx = forward(net, x);
        const double fy = forward(net, y);
        const double fm = forward(net, mid);
        const double excess = fm - 0.5 * (fx + fy);
        if (excess > tol) ++rep.violations;
        if (excess > rep.max_violation) rep.max_violation = excess;
    }
    if (rep.max_violation < 0.0) rep.max_violation = 0.0;
    return rep;
}

Tensor input_gradient(const ConvexNet& net, const Tensor& x) {
    return ad::grad_input(net.spec, net.params, x);
}

std::size_t param_count(const ConvexNet& net) { return ad::param_count(net.params); }

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    if (s.empty()) return out;
    for (const std::string& tok : split(s, ',')) {
        std::size_t pos = 0;
        int v;
        try {
            v = std::stoi(tok, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("arch text: bad ") + what + " '" + tok + "'");
        }
        if (pos != tok.size())
            throw std::runtime_error(std::string("arch text: bad ") + what + " '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

double parse_double(const std::string& s, const char* what) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("arch text: bad ") + what + " '" + s + "'");
    }
    if (pos != s.size())
        throw std::runtime_error(std::string("arch text: bad ") + what + " '" + s + "'");
    return v;
}

template <std::size_t N>
std::string join_ints(const std::array<int, N>& v) {
    std::string out;
    for (std::size_t i = 0; i < N; ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

template <std::size_t N>
std::string join_bools(const std::array<bool, N>& v) {
    std::string out;
    for (std::size_t i = 0; i < N; ++i) {
        if (i) out += ',';
        out += v[i] ? '1' : '0';
    }
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

template <std::size_t N>
std::array<bool, N> parse_bool_array(const std::string& s, const char* what) {
    std::vector<int> v = parse_int_list(s, what);
    if (v.size() != N)
        throw std::runtime_error(std::string("arch text: ") + what + " needs " +
                                 std::to_string(N) + " entries");
    std::array<bool, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        if (v[i] != 0 && v[i] != 1)
            throw std::runtime_error(std::string("arch text: ") + what + " entries must be 0/1");
        out[i] = v[i] == 1;
    }
    return out;
}

template <std::size_t N>
std::array<int, N> parse_int_array(const std::string& s, const char* what) {
    std::vector<int> v = parse_int_list(s, what);
    if (v.size() != N)
        throw std::runtime_error(std::string("arch text: ") + what + " needs " +
                                 std::to_string(N) + " entries");
    std::array<int, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = v[i];
    return out;
}

}  // namespace

std::string arch_to_text(const ArchDesc& desc) {
    std::ostringstream os;
    if (desc.family == ArchDesc::Family::Conv) {
        const ArchSpec& a = desc.conv;
        os << "conv in=" << a.channels << 'x' << a.height << 'x' << a.width
           << " widths=" << join_ints(a.widths) << " three=" << join_bools(a.three_conv)
           << " pool=" << join_bools(a.pool) << " slope=" << fmt_double(a.slope);
    } else {
        const MlpSpec& a = desc.mlp;
        os << "mlp in=" << a.input_dim << " hidden=" << join_ints(a.hidden)
           << " slope=" << fmt_double(a.slope);
    }
    return os.str();
}

ArchDesc arch_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string family;
    is >> family;
    std::vector<std::pair<std::string, std::string>> kv;
    std::string tok;
    while (is >> tok) {
        const std::size_t eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("arch text: expected key=value, got '" + tok + "'");
        kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    auto take = [&](const char* key) -> std::string {
        for (auto it = kv.begin(); it != kv.end(); ++it) {
            if (it->first == key) {
                std::string v = it->second;
                kv.erase(it);
                return v;
            }
        }
        throw std::runtime_error(std::string("arch text: missing key '") + key + "'");
    };
    ArchDesc desc;
    if (family == "conv") {
        desc.family = ArchDesc::Family::Conv;
        const std::vector<std::string> dims = split(take("in"), 'x');
        if (dims.size() != 3) throw std::runtime_error("arch text: in= needs CxHxW");
        desc.conv.channels = static_cast<int>(parse_double(dims[0], "in"));
        desc.conv.height = static_cast<int>(parse_double(dims[1], "in"));
        desc.conv.width = static_cast<int>(parse_double(dims[2], "in"));
        desc.conv.widths = parse_int_array<6>(take("widths"), "widths");
        desc.conv.three_conv = parse_bool_array<6>(take("three"), "three");
        desc.conv.pool = parse_bool_array<6>(take("pool"), "pool");
        desc.conv.slope = parse_double(take("slope"), "slope");
    } else if (family == "mlp") {
        desc.family = ArchDesc::Family::Mlp;
        desc.mlp.input_dim = static_cast<int>(parse_double(take("in"), "in"));
        desc.mlp.hidden = parse_int_list(take("hidden"), "hidden");
        desc.mlp.slope = parse_double(take("slope"), "slope");
    } else {
        throw std::runtime_error("arch text: unknown family '" + family + "'");
    }
    if (!kv.empty())
        throw std::runtime_error("arch text: unknown key '" + kv.front().first + "'");
    return desc;
}

}  // namespace clear::icnn
