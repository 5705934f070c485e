#include "clear/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace clear::theory {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double vec_dist(const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc);
}

Tensor to_tensor(const std::vector<double>& x) {
    Tensor t({static_cast<int>(x.size())});
    t.data = x;
    return t;
}

void check_dim(const ToyManifold& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.dim)
        throw std::invalid_argument("manifold: point dimension " + std::to_string(x.size()) +
                                    " does not match " + std::to_string(m.dim));
}

// Solves the (n x n) system in place by Gaussian elimination with partial
// pivoting; returns false when a pivot vanishes (degenerate subset).
bool solve_linear(std::vector<double>& a, std::vector<double>& rhs, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-12) return false;
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (int i = 0; i < n; ++i) rhs[i] /= a[i * n + i];
    return true;
}

// Projection onto the convex hull of `verts`: the minimizer lies in the
// relative interior of some face, so enumerate vertex subsets, solve the
// affine least-squares on each, and keep feasible candidates.
std::vector<double> hull_project(const std::vector<std::vector<double>>& verts,
                                 const std::vector<double>& x) {
    const int m = static_cast<int>(verts.size());
    const int d = static_cast<int>(x.size());
    if (m == 0) throw std::invalid_argument("manifold: empty vertex set");
    if (m > 16) throw std::invalid_argument("manifold: subset enumeration capped at 16 vertices");

    std::vector<double> best;
    double best_dist = 1e300;
    std::vector<int> idx;
    for (unsigned mask = 1; mask < (1u << m); ++mask) {
        idx.clear();
        for (int v = 0; v < m; ++v)
            if (mask & (1u << v)) idx.push_back(v);
        const int k = static_cast<int>(idx.size());
        const int n = k + 1;
        std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), rhs(n, 0.0);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                double dot = 0.0;
                for (int c = 0; c < d; ++c) dot += verts[idx[i]][c] * verts[idx[j]][c];
                a[i * n + j] = dot;
            }
            a[i * n + k] = 1.0;
            a[k * n + i] = 1.0;
            double dot = 0.0;
            for (int c = 0; c < d; ++c) dot += verts[idx[i]][c] * x[c];
            rhs[i] = dot;
        }
        rhs[k] = 1.0;
        if (!solve_linear(a, rhs, n)) continue;
        bool feasible = true;
        for (int i = 0; i < k; ++i)
            if (rhs[i] < -1e-10) {
                feasible = false;
                break;
            }
        if (!feasible) continue;
        std::vector<double> p(d, 0.0);
        for (int i = 0; i < k; ++i)
            for (int c = 0; c < d; ++c) p[c] += rhs[i] * verts[idx[i]][c];
        const double dist = vec_dist(p, x);
        if (dist < best_dist) {
            best_dist = dist;
            best = std::move(p);
        }
    }
    if (best.empty()) throw std::logic_error("manifold: hull projection found no face");
    return best;
}

}  // namespace

ToyManifold ToyManifold::ball(std::vector<double> center, double radius) {
    if (center.empty() || !(radius > 0.0)) throw std::invalid_argument("ball: bad parameters");
    ToyManifold m;
    m.kind = Kind::Ball;
    m.dim = static_cast<int>(center.size());
    m.center = std::move(center);
    m.radius = radius;
    return m;
}

ToyManifold ToyManifold::segment(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || a.size() != b.size()) throw std::invalid_argument("segment: bad endpoints");
    ToyManifold m;
    m.kind = Kind::Segment;
    m.dim = static_cast<int>(a.size());
    m.a = std::move(a);
    m.b = std::move(b);
    return m;
}

ToyManifold ToyManifold::polytope(std::vector<std::vector<double>> vertices) {
    if (vertices.empty()) throw std::invalid_argument("polytope: no vertices");
    ToyManifold m;
    m.kind = Kind::Polytope;
    m.dim = static_cast<int>(vertices[0].size());
    for (const auto& v : vertices)
        if (static_cast<int>(v.size()) != m.dim)
            throw std::invalid_argument("polytope: inconsistent vertex dimensions");
    m.vertices = std::move(vertices);
    return m;
}

ToyManifold ToyManifold::point_cloud(std::vector<std::vector<double>> points) {
    ToyManifold m = polytope(std::move(points));
    m.kind = Kind::PointCloud;
    return m;
}

const char* manifold_kind_name(ToyManifold::Kind k) {
    switch (k) {
        case ToyManifold::Kind::Ball: return "ball";
        case ToyManifold::Kind::Segment: return "segment";
        case ToyManifold::Kind::Polytope: return "polytope";
        case ToyManifold::Kind::PointCloud: return "point-cloud";
    }
    return "?";
}

std::pair<std::vector<double>, std::vector<double>> ToyManifold::bounding_box(
    double margin) const {
    std::vector<double> lo(dim, 1e300), hi(dim, -1e300);
    auto absorb = [&](const std::vector<double>& p) {
        for (int i = 0; i < dim; ++i) {
            lo[i] = std::min(lo[i], p[i]);
            hi[i] = std::max(hi[i], p[i]);
        }
    };
    switch (kind) {
        case Kind::Ball:
            for (int i = 0; i < dim; ++i) {
                lo[i] = center[i] - radius;
                hi[i] = center[i] + radius;
            }
            break;
        case Kind::Segment:
            absorb(a);
            absorb(b);
            break;
        case Kind::Polytope:
        case Kind::PointCloud:
            for (const auto& v : vertices) absorb(v);
            break;
    }
    for (int i = 0; i < dim; ++i) {
        lo[i] -= margin;
        hi[i] += margin;
    }
    return {lo, hi};
}

std::vector<double> manifold_project(const ToyManifold& m, const std::vector<double>& x) {
    check_dim(m, x);
    switch (m.kind) {
        case ToyManifold::Kind::Ball: {
            const double d = vec_dist(x, m.center);
            if (d <= m.radius) return x;
            std::vector<double> p(m.dim);
            for (int i = 0; i < m.dim; ++i)
                p[i] = m.center[i] + (x[i] - m.center[i]) * (m.radius / d);
            return p;
        }
        case ToyManifold::Kind::Segment: {
            double num = 0.0, den = 0.0;
            for (int i = 0; i < m.dim; ++i) {
                num += (x[i] - m.a[i]) * (m.b[i] - m.a[i]);
                den += (m.b[i] - m.a[i]) * (m.b[i] - m.a[i]);
            }
            const double t = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
            std::vector<double> p(m.dim);
            for (int i = 0; i < m.dim; ++i) p[i] = m.a[i] + t * (m.b[i] - m.a[i]);
            return p;
        }
        case ToyManifold::Kind::Polytope:
        case ToyManifold::Kind::PointCloud:
            return hull_project(m.vertices, x);
    }
    throw std::logic_error("manifold: unknown kind");
}

double manifold_distance(const ToyManifold& m, const std::vector<double>& x) {
    return vec_dist(x, manifold_project(m, x));
}

std::vector<double> manifold_sample(const ToyManifold& m, Rng& rng) {
    switch (m.kind) {
        case ToyManifold::Kind::Ball: {
            std::vector<double> dir(m.dim);
            double n = 0.0;
            do {
                n = 0.0;
                for (int i = 0; i < m.dim; ++i) {
                    dir[i] = rng.normal(0.0, 1.0);
                    n += dir[i] * dir[i];
                }
                n = std::sqrt(n);
            } while (n < 1e-12);
            const double r =
                m.radius * std::pow(rng.uniform(0.0, 1.0), 1.0 / static_cast<double>(m.dim));
            for (int i = 0; i < m.dim; ++i) dir[i] = m.center[i] + dir[i] * (r / n);
            return dir;
        }
        case ToyManifold::Kind::Segment: {
            const double t = rng.uniform(0.0, 1.0);
            std::vector<double> p(m.dim);
            for (int i = 0; i < m.dim; ++i) p[i] = m.a[i] + t * (m.b[i] - m.a[i]);
            return p;
        }
        case ToyManifold::Kind::Polytope:
        case ToyManifold::Kind::PointCloud: {
            std::vector<double> w(m.vertices.size());
            double total = 0.0;
            for (double& v : w) {
                v = -std::log(1.0 - rng.uniform(0.0, 1.0)) + 1e-12;
                total += v;
            }
            std::vector<double> p(m.dim, 0.0);
            for (std::size_t k = 0; k < w.size(); ++k)
                for (int i = 0; i < m.dim; ++i) p[i] += (w[k] / total) * m.vertices[k][i];
            return p;
        }
    }
    throw std::logic_error("manifold: unknown kind");
}

double VerificationReport::stat(const std::string& key) const {
    for (const auto& [k, v] : stats)
        if (k == key) return v;
    throw std::out_of_range("report '" + name + "' has no stat '" + key + "'");
}

void VerificationReport::add(const std::string& key, double value) {
    stats.emplace_back(key, value);
}

std::string report_text(const VerificationReport& report) {
    std::ostringstream os;
    os << (report.pass ? "[PASS] " : "[FAIL] ") << report.name << '\n';
    os << "  seed = " << report.seed << '\n';
    if (!report.config_echo.empty()) os << "  config: " << report.config_echo << '\n';
    for (const auto& [k, v] : report.stats) os << "  " << k << " = " << fmt_double(v) << '\n';
    return os.str();
}

VerificationReport verify_distance_properties(const ToyManifold& m, int n_pairs,
                                              std::uint64_t seed) {
    if (n_pairs < 2) throw std::invalid_argument("verify_distance_properties: n_pairs < 2");
    constexpr double kTol = 1e-9;
    const auto [lo, hi] = m.bounding_box(2.0);
    Rng rng(seed);
    auto draw = [&]() {
        std::vector<double> p(m.dim);
        for (int i = 0; i < m.dim; ++i) p[i] = rng.uniform(lo[i], hi[i]);
        return p;
    };

    int lipschitz_bad = 0, midpoint_bad = 0;
    double max_lip = 0.0, max_mid = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
        const std::vector<double> x = draw(), y = draw();
        const double dx = manifold_distance(m, x);
        const double dy = manifold_distance(m, y);
        std::vector<double> mid(m.dim);
        for (int i = 0; i < m.dim; ++i) mid[i] = 0.5 * (x[i] + y[i]);
        const double dm = manifold_distance(m, mid);
        const double lip_excess = std::abs(dx - dy) - vec_dist(x, y);
        const double mid_excess = dm - 0.5 * (dx + dy);
        if (lip_excess > kTol) ++lipschitz_bad;
        if (mid_excess > kTol) ++midpoint_bad;
        max_lip = std::max(max_lip, lip_excess);
        max_mid = std::max(max_mid, mid_excess);
    }

    VerificationReport rep;
    rep.name = std::string("distance-properties/") + manifold_kind_name(m.kind);
    rep.seed = seed;
    rep.config_echo = std::string("manifold=") + manifold_kind_name(m.kind) +
                      " dim=" + std::to_string(m.dim) + " n_pairs=" + std::to_string(n_pairs) +
                      " tol=" + fmt_double(kTol);
    rep.add("lipschitz_violations", lipschitz_bad);
    rep.add("midpoint_violations", midpoint_bad);
    rep.add("max_lipschitz_excess", max_lip);
    rep.add("max_midpoint_excess", max_mid);
    rep.pass = lipschitz_bad == 0 && midpoint_bad == 0;
    return rep;
}

VerificationReport verify_minima_on_manifold(const icnn::ConvexNet& net, const ToyManifold& m,
                                             const MinimaCheckConfig& cfg, std::uint64_t seed) {
    if (net.input_shape != std::vector<int>{m.dim})
        throw std::invalid_argument("verify_minima: net input does not match manifold dim");
    const auto [lo, hi] = m.bounding_box(1.0);
    Rng rng(seed);
    auto draw_box = [&]() {
        std::vector<double> p(m.dim);
        for (int i = 0; i < m.dim; ++i) p[i] = rng.uniform(lo[i], hi[i]);
        return p;
    };

    int near = 0;
    double min_phi = 1e300;
    for (int s = 0; s < cfg.n_starts; ++s) {
        Tensor x = to_tensor(draw_box());
        Tensor best = x;
        double best_phi = icnn::forward(net, x);
        for (int k = 0; k < cfg.budget; ++k) {
            Tensor g = icnn::input_gradient(net, x);
            axpy_inplace(x, -cfg.step, g);
            const double phi = icnn::forward(net, x);
            if (phi < best_phi) {
                best_phi = phi;
                best = x;
            }
        }
        min_phi = std::min(min_phi, best_phi);
        if (manifold_distance(m, best.data) <= cfg.eps) ++near;
    }

    std::vector<double> off_phi;
    off_phi.reserve(cfg.n_off);
    int attempts = 0;
    while (static_cast<int>(off_phi.size()) < cfg.n_off) {
        if (++attempts > cfg.n_off * 1000)
            throw std::runtime_error("verify_minima: cannot sample off-manifold points");
        const std::vector<double> p = draw_box();
        if (manifold_distance(m, p) < cfg.off_margin) continue;
        off_phi.push_back(icnn::forward(net, to_tensor(p)));
    }
    std::sort(off_phi.begin(), off_phi.end());
    const int qi = std::clamp(
        static_cast<int>(std::ceil(cfg.quantile * static_cast<double>(off_phi.size()))) - 1, 0,
        static_cast<int>(off_phi.size()) - 1);
    const double threshold = off_phi[qi];

    int low = 0;
    double mean_manifold_phi = 0.0;
    for (int s = 0; s < cfg.n_manifold; ++s) {
        const double phi = icnn::forward(net, to_tensor(manifold_sample(m, rng)));
        mean_manifold_phi += phi;
        if (phi <= threshold) ++low;
    }
    mean_manifold_phi /= std::max(1, cfg.n_manifold);

    const double frac_near = static_cast<double>(near) / std::max(1, cfg.n_starts);
    const double frac_low = static_cast<double>(low) / std::max(1, cfg.n_manifold);

    VerificationReport rep;
    rep.name = std::string("minima-on-manifold/") + manifold_kind_name(m.kind);
    rep.seed = seed;
    rep.config_echo = std::string("manifold=") + manifold_kind_name(m.kind) +
                      " n_starts=" + std::to_string(cfg.n_starts) + " eps=" + fmt_double(cfg.eps) +
                      " budget=" + std::to_string(cfg.budget) + " step=" + fmt_double(cfg.step) +
                      " quantile=" + fmt_double(cfg.quantile);
    rep.add("frac_endpoints_near", frac_near);
    rep.add("frac_manifold_low", frac_low);
    rep.add("min_phi_found", min_phi);
    rep.add("off_quantile_value", threshold);
    rep.add("mean_manifold_phi", mean_manifold_phi);
    rep.pass = frac_near >= cfg.frac_required && frac_low >= cfg.frac_required;
    return rep;
}

std::vector<double> SelectorInstance::x_plus() const {
    std::vector<double> p = target;
    p[sel] = value;
    return p;
}

Tensor SelectorInstance::project(const Tensor& x, double rhs) const {
    Tensor p = x;
    p[sel] = rhs;
    return p;
}

SelectorInstance make_selector_instance() {
    SelectorInstance inst;
    inst.dim = 2;
    inst.sel = 0;
    inst.value = 5.0;
    inst.target = {0.0, 2.0};

    ad::NetSpec spec;
    ad::LayerSpec lin{ad::Op::Linear};
    lin.out_dim = inst.dim;
    lin.src = ad::LayerSpec::kInput;
    spec.push_back(lin);
    spec.push_back(ad::LayerSpec{ad::Op::Square});
    spec.push_back(ad::LayerSpec{ad::Op::Sum});

    icnn::ConvexNet net;
    net.spec = spec;
    net.input_shape = {inst.dim};
    net.params = ad::make_params(spec, net.input_shape);
    for (int i = 0; i < inst.dim; ++i) {
        net.params[0].w[static_cast<std::size_t>(i) * inst.dim + i] = 1.0;
        net.params[0].b[i] = -inst.target[i];
    }
    net.clip_mask.assign(spec.size(), icnn::ClipMask{});
    net.mode = icnn::Mode::CLEAR;
    inst.f_net = std::move(net);
    return inst;
}

namespace {

struct PgdRun {
    std::vector<std::vector<double>> iterates;  // includes the projected start
    std::vector<double> steps;
    std::vector<double> final_point;
};

PgdRun run_selector_pgd(const SelectorInstance& inst, const ConvergenceCheckConfig& cfg,
                        double rhs) {
    std::vector<double> start = cfg.start.empty() ? std::vector<double>(inst.dim, 0.0) : cfg.start;
    if (static_cast<int>(start.size()) != inst.dim)
        throw std::invalid_argument("verify_pgd: start dimension mismatch");
    Tensor x0 = inst.project(to_tensor(start), rhs);

    PgdRun run;
    run.iterates.push_back(x0.data);
    Tensor final_x = solver::pgd_minimize(
        std::move(x0), cfg.pgd,
        [&](const Tensor& x) { return icnn::input_gradient(inst.f_net, x); },
        [&](const Tensor& x) { return inst.project(x, rhs); },
        [&](int, const Tensor& x, double t) {
            run.iterates.push_back(x.data);
            run.steps.push_back(t);
        });
    run.final_point = final_x.data;
    return run;
}

}  // namespace

VerificationReport verify_pgd_convergence(const SelectorInstance& inst,
                                          const ConvergenceCheckConfig& cfg) {
    const PgdRun run = run_selector_pgd(inst, cfg, inst.value);
    const std::vector<double> xp = inst.x_plus();

    double max_fejer_excess = -1e300;
    for (std::size_t k = 0; k + 1 < run.iterates.size(); ++k) {
        const double ek = vec_dist(run.iterates[k], xp);
        const double ek1 = vec_dist(run.iterates[k + 1], xp);
        const double excess = ek1 * ek1 - (ek * ek + run.steps[k] * run.steps[k]);
        max_fejer_excess = std::max(max_fejer_excess, excess);
    }
    const double final_err = vec_dist(run.final_point, xp);

    VerificationReport rep;
    rep.name = "pgd-convergence/selector";
    rep.config_echo = std::string("schedule=") + solver::schedule_name(cfg.pgd.schedule) +
                      " c=" + fmt_double(cfg.pgd.c) +
                      " iters=" + std::to_string(cfg.pgd.max_iters) +
                      " final_tol=" + fmt_double(cfg.final_tol);
    rep.add("final_err", final_err);
    rep.add("max_fejer_excess", max_fejer_excess);
    rep.add("iterations", static_cast<double>(run.iterates.size()) - 1);
    rep.pass = final_err < cfg.final_tol && max_fejer_excess <= cfg.fejer_tol;
    return rep;
}

VerificationReport verify_stability(const SelectorInstance& inst,
                                    const StabilityCheckConfig& cfg, std::uint64_t seed) {
    if (cfg.noise_levels.empty() || cfg.noise_levels.front() != 0.0)
        throw std::invalid_argument("verify_stability: noise levels must start at 0");
    if (!std::is_sorted(cfg.noise_levels.begin(), cfg.noise_levels.end()))
        throw std::invalid_argument("verify_stability: noise levels must be ascending");
    if (cfg.trials < 1) throw std::invalid_argument("verify_stability: trials < 1");

    const std::vector<double> xp = inst.x_plus();
    std::vector<double> errs;
    for (double level : cfg.noise_levels) {
        Rng rng(seed);  // same draws across levels so e scales cleanly with delta
        double acc = 0.0;
        for (int t = 0; t < cfg.trials; ++t) {
            const double rhs = inst.value + level * rng.normal(0.0, 1.0);
            const PgdRun run = run_selector_pgd(inst, cfg.base, rhs);
            acc += vec_dist(run.final_point, xp);
        }
        errs.push_back(acc / cfg.trials);
    }

    bool monotone = true;
    for (std::size_t i = 0; i + 1 < errs.size(); ++i)
        if (errs[i + 1] + 1e-12 < errs[i]) monotone = false;
    double c_fit = 0.0;
    for (std::size_t i = 1; i < errs.size(); ++i)
        c_fit = std::max(c_fit, (errs[i] - errs[0]) / cfg.noise_levels[i]);
    const double ratio =
        errs.size() >= 2 && errs.back() > 0.0 ? errs[1] / errs.back() : 1e300;

    VerificationReport rep;
    rep.name = "stability/selector";
    rep.seed = seed;
    std::ostringstream cfg_echo;
    cfg_echo << "levels=";
    for (std::size_t i = 0; i < cfg.noise_levels.size(); ++i)
        cfg_echo << (i ? "," : "") << fmt_double(cfg.noise_levels[i]);
    cfg_echo << " trials=" << cfg.trials << " schedule=" << solver::schedule_name(cfg.base.pgd.schedule)
             << " c=" << fmt_double(cfg.base.pgd.c) << " iters=" << cfg.base.pgd.max_iters;
    rep.config_echo = cfg_echo.str();
    for (std::size_t i = 0; i < errs.size(); ++i) {
        rep.add("level_" + std::to_string(i), cfg.noise_levels[i]);
        rep.add("e_" + std::to_string(i), errs[i]);
    }
    rep.add("monotone", monotone ? 1.0 : 0.0);
    rep.add("C_fit", c_fit);
    rep.add("small_to_large_ratio", ratio);
    rep.pass = monotone && errs[0] <= cfg.e0_tol && ratio < cfg.ratio_bound;
    return rep;
}

}  // namespace clear::theory
