#include "clear/training.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "clear/kernels.hpp"

namespace clear::train {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

icnn::Mode net_mode(Mode m) {
    return m == Mode::UNCLEAR ? icnn::Mode::UNCLEAR : icnn::Mode::CLEAR;
}

void add_noise_inplace(Tensor& x, double std, Rng& rng) {
    if (std <= 0.0) return;
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += rng.normal(0.0, std);
}

}  // namespace

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::CLEAR: return "CLEAR";
        case Mode::UNCLEAR: return "UNCLEAR";
        case Mode::AR: return "AR";
    }
    return "?";
}

Mode mode_from_name(const std::string& name) {
    if (name == "CLEAR") return Mode::CLEAR;
    if (name == "UNCLEAR") return Mode::UNCLEAR;
    if (name == "AR") return Mode::AR;
    throw std::invalid_argument("unknown training mode '" + name + "'");
}

std::string config_text(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "arch = " << icnn::arch_to_text(cfg.arch) << '\n'
       << "train.mode = " << mode_name(cfg.mode) << '\n'
       << "train.latent_steps = " << cfg.latent_steps << '\n'
       << "train.eta = " << fmt_double(cfg.latent_step_size) << '\n'
       << "train.delta0 = " << fmt_double(cfg.init_noise_std) << '\n'
       << "train.deltak = " << fmt_double(cfg.walk_noise_std) << '\n'
       << "train.gp_weight = " << fmt_double(cfg.gp_weight) << '\n'
       << "train.gp_eps = " << fmt_double(cfg.gp_eps) << '\n'
       << "train.batch_size = " << cfg.batch_size << '\n'
       << "train.epochs = " << cfg.epochs << '\n'
       << "train.lr = " << fmt_double(cfg.lr) << '\n'
       << "train.seed = " << cfg.seed << '\n';
    return os.str();
}

Checkpoint make_checkpoint(const icnn::ConvexNet& net, const TrainConfig& cfg, int epoch) {
    Checkpoint ckpt;
    ckpt.arch = cfg.arch;
    ckpt.mode = cfg.mode;
    ckpt.epoch = epoch;
    ckpt.seed = cfg.seed;
    ckpt.config_echo = config_text(cfg);
    ckpt.layers.resize(net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const Tensor& w = net.params[i].w;
        const Tensor& b = net.params[i].b;
        ckpt.layers[i].w.assign(w.data.begin(), w.data.end());
        ckpt.layers[i].b.assign(b.data.begin(), b.data.end());
    }
    return ckpt;
}

icnn::ConvexNet net_from_checkpoint(const Checkpoint& ckpt) {
    icnn::ConvexNet net = icnn::build_desc(ckpt.arch, net_mode(ckpt.mode), 0);
    if (ckpt.layers.size() != net.params.size())
        throw std::runtime_error("checkpoint: layer count " + std::to_string(ckpt.layers.size()) +
                                 " does not match arch (" + std::to_string(net.params.size()) + ")");
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        Tensor& w = net.params[i].w;
        Tensor& b = net.params[i].b;
        if (ckpt.layers[i].w.size() != w.size() || ckpt.layers[i].b.size() != b.size())
            throw std::runtime_error("checkpoint: parameter blob size mismatch at layer " +
                                     std::to_string(i));
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = ckpt.layers[i].w[j];
        for (std::size_t j = 0; j < b.size(); ++j) b[j] = ckpt.layers[i].b[j];
    }
    return net;
}

Tensor latent_optimize(const icnn::ConvexNet& net, const Tensor& x_plus,
                       const TrainConfig& cfg, Rng& rng) {
    if (cfg.latent_steps < 0) throw std::invalid_argument("latent_optimize: t must be >= 0");
    if (!(cfg.latent_step_size > 0.0))
        throw std::invalid_argument("latent_optimize: eta must be > 0");
    Tensor x = x_plus;
    add_noise_inplace(x, cfg.init_noise_std, rng);
    for (int k = 0; k < cfg.latent_steps; ++k) {
        Tensor g = icnn::input_gradient(net, x);
        axpy_inplace(x, -cfg.latent_step_size, g);
        add_noise_inplace(x, cfg.walk_noise_std, rng);
    }
    return x;
}

Tensor latent_optimize(const icnn::ConvexNet& net, const Tensor& x_plus,
                       const TrainConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    return latent_optimize(net, x_plus, cfg, rng);
}

Tensor generate_sample(const icnn::ConvexNet& net, const Tensor& x_plus,
                       const TrainConfig& cfg, Rng& rng) {
    if (cfg.mode == Mode::AR) {
        Tensor x = x_plus;
        add_noise_inplace(x, cfg.init_noise_std, rng);
        return x;
    }
    return latent_optimize(net, x_plus, cfg, rng);
}

ad::Tape::Var gradient_penalty_var(ad::Tape& tape, const icnn::ConvexNet& net,
                                   const std::vector<Tensor>& points, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("gradient_penalty: eps must be > 0");
    if (points.empty()) throw std::invalid_argument("gradient_penalty: no points");
    const ad::Tape::Var one = tape.constant(1.0);
    std::vector<ad::Tape::Var> terms;
    terms.reserve(points.size());
    for (const Tensor& x : points) {
        Tensor v = icnn::input_gradient(net, x);
        const double n = norm2(v);
        if (n < 1e-12) {
            for (std::size_t j = 0; j < v.size(); ++j) v[j] = 0.0;
            v[0] = 1.0;
        } else {
            kern::active().scale(1.0 / n, v.ptr(), v.size());
        }
        Tensor xp = x, xm = x;
        axpy_inplace(xp, eps, v);
        axpy_inplace(xm, -eps, v);
        const ad::Tape::Var d =
            tape.scale(1.0 / (2.0 * eps), tape.sub(tape.eval(xp), tape.eval(xm)));
        terms.push_back(tape.square(tape.sub(d, one)));
    }
    return tape.mean(terms);
}

double gradient_penalty(const icnn::ConvexNet& net, const std::vector<Tensor>& points,
                        double eps) {
    ad::Tape tape(net.spec, net.params);
    return tape.value(gradient_penalty_var(tape, net, points, eps));
}

ad::Tape::Var clear_loss_var(ad::Tape& tape, const icnn::ConvexNet& net,
                             const std::vector<Tensor>& reals,
                             const std::vector<Tensor>& generateds,
                             const std::vector<Tensor>& gp_points, double lambda,
                             double gp_eps, LossParts* parts) {
    if (reals.empty() || generateds.empty())
        throw std::invalid_argument("clear_loss: empty batch");
    if (reals.size() != generateds.size())
        throw std::invalid_argument("clear_loss: batch sizes differ (" +
                                    std::to_string(reals.size()) + " vs " +
                                    std::to_string(generateds.size()) + ")");
    std::vector<ad::Tape::Var> vr, vg;
    vr.reserve(reals.size());
    vg.reserve(generateds.size());
    for (const Tensor& x : reals) vr.push_back(tape.eval(x));
    for (const Tensor& x : generateds) vg.push_back(tape.eval(x));
    const ad::Tape::Var real_mean = tape.mean(vr);
    const ad::Tape::Var gen_mean = tape.mean(vg);
    ad::Tape::Var loss = tape.sub(real_mean, gen_mean);
    ad::Tape::Var penalty{-1};
    if (lambda != 0.0 && !gp_points.empty()) {
        penalty = gradient_penalty_var(tape, net, gp_points, gp_eps);
        loss = tape.add(loss, tape.scale(lambda, penalty));
    }
    if (parts) {
        parts->real_mean = real_mean;
        parts->gen_mean = gen_mean;
        parts->penalty = penalty;
    }
    return loss;
}

double clear_loss(const icnn::ConvexNet& net, const std::vector<Tensor>& reals,
                  const std::vector<Tensor>& generateds,
                  const std::vector<Tensor>& gp_points, double lambda, double gp_eps) {
    ad::Tape tape(net.spec, net.params);
    return tape.value(clear_loss_var(tape, net, reals, generateds, gp_points, lambda, gp_eps));
}

TrainResult train(const std::vector<Tensor>& dataset, const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (cfg.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");

    Rng rng(cfg.seed);
    const std::uint64_t net_seed = rng.engine()();
    icnn::ConvexNet net = icnn::build_desc(cfg.arch, net_mode(cfg.mode), net_seed);
    for (const Tensor& x : dataset)
        if (x.shape != net.input_shape)
            throw std::invalid_argument("train: sample shape " + shape_str(x.shape) +
                                        " does not match arch input " +
                                        shape_str(net.input_shape));

    const int n = static_cast<int>(dataset.size());
    const int batch = std::min(cfg.batch_size, n);
    const int steps = n / batch;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        EpochStats stats;
        stats.epoch = epoch;
        for (int step = 0; step < steps; ++step) {
            std::vector<Tensor> reals, gens, gp_points;
            reals.reserve(batch);
            gens.reserve(batch);
            gp_points.reserve(batch);
            for (int j = 0; j < batch; ++j) {
                const Tensor& xp = dataset[order[step * batch + j]];
                reals.push_back(xp);
                gens.push_back(generate_sample(net, xp, cfg, rng));
            }
            for (int j = 0; j < batch; ++j) {
                const double a = rng.uniform(0.0, 1.0);
                Tensor p = reals[j];
                kern::active().scale(a, p.ptr(), p.size());
                axpy_inplace(p, 1.0 - a, gens[j]);
                gp_points.push_back(std::move(p));
            }

            ad::Tape tape(net.spec, net.params);
            LossParts parts;
            const ad::Tape::Var loss = clear_loss_var(tape, net, reals, gens, gp_points,
                                                      cfg.gp_weight, cfg.gp_eps, &parts);
            const double loss_value = tape.value(loss);
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                                         " step " + std::to_string(step) + " (loss " +
                                         std::to_string(loss_value) + ")");
            stats.loss += loss_value;
            stats.real_mean += tape.value(parts.real_mean);
            stats.gen_mean += tape.value(parts.gen_mean);
            if (parts.penalty.id >= 0) stats.penalty += tape.value(parts.penalty);

            const ad::ParamSet grads = tape.grad_params(loss);
            for (std::size_t i = 0; i < net.params.size(); ++i) {
                if (net.params[i].w.size())
                    axpy_inplace(net.params[i].w, -cfg.lr, grads[i].w);
                if (net.params[i].b.size())
                    axpy_inplace(net.params[i].b, -cfg.lr, grads[i].b);
            }
            icnn::clip_weights(net);
        }
        const double inv = 1.0 / std::max(1, steps);
        stats.loss *= inv;
        stats.real_mean *= inv;
        stats.gen_mean *= inv;
        stats.penalty *= inv;
        result.stats.push_back(stats);
    }
    result.checkpoint = make_checkpoint(net, cfg, cfg.epochs);
    return result;
}

}  // namespace clear::train
