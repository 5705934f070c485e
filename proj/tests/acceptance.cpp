#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "clear/evaluation.hpp"
#include "clear/io.hpp"
#include "clear/theory.hpp"

// Acceptance gate. Each criterion prints exactly one pass/fail line; the
// doctest assertion keeps ctest red until every line passes. Tolerances and
// budgets are pinned here, not configurable.

using namespace clear;
namespace fs = std::filesystem;

namespace {

void report(int n, bool pass, const std::string& detail) {
    std::printf("criterion %d [%s] %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(pass, "criterion ", n, ": ", detail);
}

std::string fmt(const char* f, ...) {
    va_list ap;
    va_start(ap, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

Tensor random_image(int h, int w, std::uint64_t seed) {
    Tensor x({2, h, w});
    Rng rng(seed);
    rng.fill_normal(x, 1.0);
    return x;
}

// ---- shared imaging setup for criteria 8 and 9 --------------------------

// Desk-scale training configuration. 100 epochs on 200 32x32 phantoms runs
// in ~15 min on one core, inside the 30-minute budget.
train::TrainConfig imaging_config(train::Mode mode) {
    train::TrainConfig tc;
    tc.arch.family = icnn::ArchDesc::Family::Conv;
    tc.arch.conv.widths = {4, 4, 8, 8, 16, 16};
    tc.mode = mode;
    tc.latent_steps = 60;
    tc.latent_step_size = 0.2;
    tc.gp_weight = 1.0;
    tc.epochs = 100;
    tc.batch_size = 8;
    tc.lr = 3e-4;
    tc.seed = 0;
    return tc;
}

struct ImagingSetup {
    std::vector<Tensor> trainset, heldout;
    fm::SamplingMask mask;

    ImagingSetup() : mask(fm::make_mask(fm::MaskKind::Uniform1d, 32, 32, 3.0, 0.08, 0)) {
        for (int i = 0; i < 200; ++i)
            trainset.push_back(eval::make_phantom(eval::PhantomKind::Ellipses, 32, 1000 + i));
        for (int i = 0; i < 20; ++i)
            heldout.push_back(eval::make_phantom(eval::PhantomKind::Ellipses, 32, 5000 + i));
    }
};

const ImagingSetup& imaging() {
    static ImagingSetup s;
    return s;
}

const icnn::ConvexNet& imaging_net(train::Mode mode, double* train_seconds = nullptr) {
    static icnn::ConvexNet nets[2];
    static double seconds[2] = {0, 0};
    static bool done[2] = {false, false};
    int idx = mode == train::Mode::CLEAR ? 0 : 1;
    if (!done[idx]) {
        double t0 = now_s();
        auto res = train::train(imaging().trainset, imaging_config(mode));
        seconds[idx] = now_s() - t0;
        nets[idx] = train::net_from_checkpoint(res.checkpoint);
        done[idx] = true;
    }
    if (train_seconds) *train_seconds = seconds[idx];
    return nets[idx];
}

struct MeanMetrics {
    double nmse = 0, psnr = 0;
};

MeanMetrics mean_metrics(const std::vector<Tensor>& refs, const std::vector<Tensor>& recs) {
    MeanMetrics m;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        auto rm = metrics::magnitude_image(refs[i]);
        auto xm = metrics::magnitude_image(recs[i]);
        double peak = *std::max_element(rm.data.begin(), rm.data.end());
        m.nmse += metrics::nmse(rm, xm);
        m.psnr += metrics::psnr(rm, xm, peak <= 0 ? 1.0 : peak);
    }
    m.nmse /= static_cast<double>(refs.size());
    m.psnr /= static_cast<double>(refs.size());
    return m;
}

solver::PGDConfig imaging_pgd() {
    solver::PGDConfig cfg;
    cfg.max_iters = 100;
    cfg.schedule = solver::Schedule::Harmonic;
    cfg.c = 4.0;
    cfg.record_trace = false;
    return cfg;
}

}  // namespace

TEST_CASE("criterion 1: convexity by construction") {
    // Any CLEAR-mode net after clip_weights: perturb the parameters the way
    // an optimizer step would, clip, then test 1000 midpoint pairs.
    constexpr double kTol = 1e-6;
    constexpr int kPairs = 1000;
    int total_violations = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        icnn::ConvexNet net;
        if (seed % 2 == 0) {
            icnn::ArchSpec arch;
            arch.height = arch.width = 16;
            arch.widths = {4, 4, 8, 8, 8, 8};
            arch.pool = {true, true, true, true, false, false};
            net = icnn::build(arch, icnn::Mode::CLEAR, seed);
        } else {
            icnn::MlpSpec mlp;
            mlp.input_dim = 2 + static_cast<int>(seed) % 3;
            mlp.hidden = {16, 16};
            net = icnn::build_mlp(mlp, icnn::Mode::CLEAR, seed);
        }
        Rng rng(seed + 77);
        for (auto& p : net.params) {
            if (p.w.size()) {
                Tensor noise(p.w.shape);
                rng.fill_normal(noise, 0.1);
                axpy_inplace(p.w, 1.0, noise);
            }
        }
        icnn::clip_weights(net);
        total_violations += icnn::check_midpoint_convexity(net, kPairs, kTol, seed + 5).violations;
    }
    report(1, total_violations == 0,
           fmt("convexity after clipping: %d violations over 10 seeds x %d pairs at tol %g",
               total_violations, kPairs, kTol));
}

TEST_CASE("criterion 2: gradient correctness") {
    constexpr double kTol = 1e-4;
    constexpr double kStep = 1e-5;
    double worst = 0;
    std::size_t max_params = 0;
    Rng pick(2024);
    for (int i = 0; i < 20; ++i) {
        ad::NetSpec spec;
        std::vector<int> in_shape;
        if (i % 2 == 0) {
            int dim = 2 + static_cast<int>(pick.uniform_int(0, 4));
            int hid = 4 + static_cast<int>(pick.uniform_int(0, 12));
            in_shape = {dim};
            spec = {
                {.op = ad::Op::Linear, .out_dim = hid, .src = ad::LayerSpec::kInput},
                {.op = ad::Op::LeakyRelu, .slope = 0.2},
                {.op = ad::Op::Linear, .out_dim = hid / 2 + 1},
                {.op = ad::Op::LeakyRelu, .slope = 0.2},
                {.op = ad::Op::Linear, .out_dim = 1},
                {.op = ad::Op::Sum},
            };
        } else {
            int ch = 2 + static_cast<int>(pick.uniform_int(0, 2));
            in_shape = {2, 8, 8};
            spec = {
                {.op = ad::Op::Conv2d, .out_ch = ch, .ksize = 3, .stride = 1, .pad = 1,
                 .src = ad::LayerSpec::kInput},
                {.op = ad::Op::LeakyRelu, .slope = 0.2},
                {.op = ad::Op::AvgPool, .pool = 2},
                {.op = ad::Op::Conv2d, .out_ch = ch, .ksize = 3, .stride = 1, .pad = 1},
                {.op = ad::Op::SkipSum, .skip_src = 2},
                {.op = ad::Op::Flatten},
                {.op = ad::Op::Linear, .out_dim = 1},
                {.op = ad::Op::Sum},
            };
        }
        auto params = ad::make_params(spec, in_shape);
        Rng rng(300 + i);
        for (auto& p : params) {
            if (p.w.size()) rng.fill_normal(p.w, 0.5);
            if (p.b.size()) rng.fill_normal(p.b, 0.5);
        }
        max_params = std::max(max_params, ad::param_count(params));
        Tensor x(in_shape);
        rng.fill_normal(x, 1.0);
        worst = std::max(worst, ad::finite_difference_check(params, spec, x, kStep));
        ad::LossFn loss = [&](ad::Tape& t) {
            auto v = t.eval(x);
            return t.add(t.square(v), t.scale(0.5, v));
        };
        worst = std::max(worst, ad::finite_difference_check_params(params, spec, loss, kStep));
    }
    report(2, worst < kTol && max_params <= 5000,
           fmt("gradients vs central differences: max rel err %.3g over 20 nets (max %zu params)",
               worst, max_params));
}

TEST_CASE("criterion 3: projection exactness") {
    constexpr double kFeasTol = 1e-10;
    bool ok = true;
    double worst_feas = 0;
    const fm::MaskKind kinds[] = {fm::MaskKind::Uniform1d, fm::MaskKind::Random1d,
                                  fm::MaskKind::Poisson2d, fm::MaskKind::Gaussian2d};
    for (int inst = 0; inst < 50 && ok; ++inst) {
        auto mask = fm::make_mask(kinds[inst % 4], 16, 16, 2.0 + (inst % 3), 0.1, inst);
        auto truth = random_image(16, 16, 2000 + inst);
        auto b = fm::apply_A(mask, truth);
        auto x = random_image(16, 16, 3000 + inst);
        auto p = fm::project_data_consistency(mask, b, x);

        double feas = fm::residual_norm(mask, b, p);
        worst_feas = std::max(worst_feas, feas);
        ok = ok && feas < kFeasTol;

        auto pp = fm::project_data_consistency(mask, b, p);
        ok = ok && norm2(pp - p) < 1e-12;

        auto y = random_image(16, 16, 4000 + inst);
        auto py = fm::project_data_consistency(mask, b, y);
        ok = ok && norm2(p - py) <= norm2(x - y) + 1e-10;

        double dp = norm2(p - x);
        for (int k = 0; k < 100; ++k) {
            auto z = fm::project_data_consistency(mask, b, random_image(16, 16, 50000 + 100 * inst + k));
            ok = ok && norm2(z - x) >= dp - 1e-9;
        }
    }
    report(3, ok,
           fmt("projection idempotent, feasible (worst residual %.2g), non-expansive, minimal "
               "over 50 instances x 100 feasible points",
               worst_feas));
}

TEST_CASE("criterion 4: subgradient convergence on the analytic instance") {
    auto inst = theory::make_selector_instance();
    theory::ConvergenceCheckConfig cfg;  // harmonic, c = 0.8, 500 iterations
    auto rep = theory::verify_pgd_convergence(inst, cfg);
    bool pass = rep.pass && rep.stat("final_err") < 1e-3 &&
                rep.stat("max_fejer_excess") <= 1e-10;
    report(4, pass,
           fmt("harmonic-schedule descent: final err %.3g (tol 1e-3), Fejer excess %.3g (tol 1e-10)",
               rep.stat("final_err"), rep.stat("max_fejer_excess")));
}

TEST_CASE("criterion 5: distance-function properties") {
    auto ball = theory::ToyManifold::ball({0.0, 0.0}, 1.0);
    auto seg = theory::ToyManifold::segment({-1.0, 0.0}, {1.0, 0.0});
    auto tri = theory::ToyManifold::polytope({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    int violations = 0;
    for (const auto& m : {ball, seg, tri}) {
        auto rep = theory::verify_distance_properties(m, 10000, 11);
        violations += static_cast<int>(rep.stat("lipschitz_violations") +
                                       rep.stat("midpoint_violations"));
    }
    report(5, violations == 0,
           fmt("1-Lipschitz and convexity of d_M on ball/segment/triangle: %d violations over "
               "3 x 10^4 pairs at tol 1e-9",
               violations));
}

TEST_CASE("criterion 6: learned minima lie on the manifold") {
    // Desk config: 256 unit-ball samples, 2-32-32-1 net, ~2 s of training.
    auto m = theory::ToyManifold::ball({0.0, 0.0}, 1.0);
    const std::uint64_t seed = 0;
    Rng rng(seed);
    std::vector<Tensor> dataset;
    for (int i = 0; i < 256; ++i) {
        auto p = theory::manifold_sample(m, rng);
        dataset.emplace_back(std::vector<int>{2}, std::vector<double>(p.begin(), p.end()));
    }
    train::TrainConfig tc;
    tc.arch.family = icnn::ArchDesc::Family::Mlp;
    tc.arch.mlp.input_dim = 2;
    tc.arch.mlp.hidden = {32, 32};
    tc.mode = train::Mode::CLEAR;
    tc.epochs = 100;
    tc.batch_size = 16;
    tc.lr = 0.01;
    tc.gp_weight = 1.0;
    tc.seed = seed;
    double t0 = now_s();
    auto net = train::net_from_checkpoint(train::train(dataset, tc).checkpoint);
    double train_s = now_s() - t0;

    auto rep = theory::verify_minima_on_manifold(net, m, theory::MinimaCheckConfig{}, seed + 1);
    bool pass = rep.pass && rep.stat("frac_endpoints_near") >= 0.9 &&
                rep.stat("frac_manifold_low") >= 0.9 && train_s < 600.0;
    report(6, pass,
           fmt("unit-ball regularizer (%.0f s train): %.0f%% descents end within 0.1, %.0f%% "
               "manifold samples under the 10th off-manifold percentile",
               train_s, 100 * rep.stat("frac_endpoints_near"),
               100 * rep.stat("frac_manifold_low")));
}

TEST_CASE("criterion 7: stability under measurement noise") {
    auto inst = theory::make_selector_instance();
    theory::StabilityCheckConfig cfg;  // deltas {0, 1e-3, 1e-2, 1e-1}, 8 trials
    auto rep = theory::verify_stability(inst, cfg, 0);
    double ratio = rep.stat("small_to_large_ratio");
    bool pass = rep.pass && rep.stat("monotone") == 1.0 && rep.stat("e_0") < 1e-3 &&
                ratio < 0.5;
    report(7, pass,
           fmt("noise sweep monotone, e(0)=%.3g < 1e-3, e(1e-3)/e(1e-1)=%.3g < 0.5",
               rep.stat("e_0"), ratio));
}

TEST_CASE("criterion 8: end-to-end imaging gain") {
    const auto& setup = imaging();
    double train_s = 0;
    const auto& net = imaging_net(train::Mode::CLEAR, &train_s);

    std::vector<Tensor> zf, clear_rec;
    for (const Tensor& ref : setup.heldout) {
        auto b = fm::apply_A(setup.mask, ref);
        zf.push_back(fm::apply_A_adjoint(setup.mask, b));
        clear_rec.push_back(solver::pgd_reconstruct(net, setup.mask, b, imaging_pgd()).image);
    }
    auto m_zf = mean_metrics(setup.heldout, zf);
    auto m_clear = mean_metrics(setup.heldout, clear_rec);

    // TV baseline at its best weight over a 5-point grid around the optimum.
    const double grid[5] = {0.01, 0.02, 0.05, 0.1, 0.2};
    double best_tv_nmse = 1e30, best_w = 0;
    for (double w : grid) {
        std::vector<Tensor> tv;
        for (const Tensor& ref : setup.heldout)
            tv.push_back(eval::tv_reconstruct(setup.mask, fm::apply_A(setup.mask, ref), w, 60));
        auto m_tv = mean_metrics(setup.heldout, tv);
        if (m_tv.nmse < best_tv_nmse) {
            best_tv_nmse = m_tv.nmse;
            best_w = w;
        }
    }

    bool pass = train_s < 1800.0 && m_clear.psnr >= m_zf.psnr + 2.0 &&
                m_clear.nmse <= best_tv_nmse;
    report(8, pass,
           fmt("32x32 uniform-1d x3 (%.0f s train): CLEAR %.2f dB / nmse %.3f vs zero-filled "
               "%.2f dB, TV nmse %.3f at w=%g",
               train_s, m_clear.psnr, m_clear.nmse, m_zf.psnr, best_tv_nmse, best_w));
}

TEST_CASE("criterion 9: convex regularization stabilizes noisy descent") {
    const auto& setup = imaging();
    const auto& clear_net = imaging_net(train::Mode::CLEAR);
    const auto& unclear_net = imaging_net(train::Mode::UNCLEAR);

    auto trace_std = [](const std::vector<solver::IterRecord>& tr) {
        std::size_t from = tr.size() >= 50 ? tr.size() - 50 : 0;
        double mean = 0;
        for (std::size_t i = from; i < tr.size(); ++i) mean += tr[i].psnr;
        std::size_t n = tr.size() - from;
        mean /= static_cast<double>(n);
        double var = 0;
        for (std::size_t i = from; i < tr.size(); ++i)
            var += (tr[i].psnr - mean) * (tr[i].psnr - mean);
        return std::sqrt(var / static_cast<double>(n));
    };

    double sum_clear = 0, sum_unclear = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor& ref = setup.heldout[trial % setup.heldout.size()];
        auto noisy = fm::add_noise(setup.mask, fm::apply_A(setup.mask, ref), 0.5, 9000 + trial);
        auto cfg = imaging_pgd();
        cfg.record_trace = true;
        cfg.ground_truth = &ref;
        sum_clear += trace_std(solver::pgd_reconstruct(clear_net, setup.mask, noisy, cfg).trace);
        sum_unclear +=
            trace_std(solver::pgd_reconstruct(unclear_net, setup.mask, noisy, cfg).trace);
    }
    double mc = sum_clear / 10, mu = sum_unclear / 10;
    report(9, mc <= mu,
           fmt("PSNR-trace std over last 50/100 iterations at noise 0.5: CLEAR %.4f dB <= "
               "UNCLEAR %.4f dB (10 trials)",
               mc, mu));
}

TEST_CASE("criterion 10: determinism and formats") {
    auto tmp = fs::temp_directory_path() / "clear_acceptance_c10";
    fs::create_directories(tmp);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    };

    // Two identical seeded training runs, byte-compared on disk.
    std::vector<Tensor> data;
    for (int i = 0; i < 16; ++i)
        data.push_back(eval::make_phantom(eval::PhantomKind::Ellipses, 16, 600 + i));
    train::TrainConfig tc;
    tc.arch.family = icnn::ArchDesc::Family::Conv;
    tc.arch.conv.height = tc.arch.conv.width = 16;
    tc.arch.conv.widths = {4, 4, 8, 8, 8, 8};
    tc.arch.conv.pool = {true, true, true, true, false, false};
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.latent_steps = 5;
    tc.seed = 42;
    io::write_checkpoint((tmp / "a.ckpt").string(), train::train(data, tc).checkpoint);
    io::write_checkpoint((tmp / "b.ckpt").string(), train::train(data, tc).checkpoint);
    bool ckpt_same = slurp(tmp / "a.ckpt") == slurp(tmp / "b.ckpt");

    // Identical seeded reconstructions, byte-compared.
    auto net = train::net_from_checkpoint(io::read_checkpoint((tmp / "a.ckpt").string()));
    auto mask = fm::make_mask(fm::MaskKind::Uniform1d, 16, 16, 2.0, 0.1, 1);
    auto b = fm::apply_A(mask, data[0]);
    solver::PGDConfig pcfg;
    pcfg.max_iters = 10;
    pcfg.c = 0.5;
    pcfg.record_trace = false;
    io::write_image((tmp / "r1.img").string(), solver::pgd_reconstruct(net, mask, b, pcfg).image);
    io::write_image((tmp / "r2.img").string(), solver::pgd_reconstruct(net, mask, b, pcfg).image);
    bool recon_same = slurp(tmp / "r1.img") == slurp(tmp / "r2.img");

    // Format round-trips at container precision.
    auto img = io::read_image((tmp / "r1.img").string());
    io::write_image((tmp / "r3.img").string(), img);
    bool img_roundtrip = slurp(tmp / "r1.img") == slurp(tmp / "r3.img");

    auto ck = io::read_checkpoint((tmp / "a.ckpt").string());
    io::write_checkpoint((tmp / "c.ckpt").string(), ck);
    bool ckpt_roundtrip = slurp(tmp / "a.ckpt") == slurp(tmp / "c.ckpt");

    io::write_mask((tmp / "m.msk").string(), mask);
    bool mask_roundtrip = io::read_mask((tmp / "m.msk").string()).keep == mask.keep;

    fs::remove_all(tmp);
    bool pass = ckpt_same && recon_same && img_roundtrip && ckpt_roundtrip && mask_roundtrip;
    report(10, pass,
           fmt("seeded-run checkpoints %s, reconstructions %s, CLIMG1/CLCKPT1 round-trips %s",
               ckpt_same ? "identical" : "DIFFER", recon_same ? "identical" : "DIFFER",
               img_roundtrip && ckpt_roundtrip && mask_roundtrip ? "bit-exact" : "NOT bit-exact"));
}
