#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clear/icnn.hpp"
#include "clear/rng.hpp"
#include "clear/solver.hpp"
#include "clear/tensor.hpp"

// Numerical certification of the distance/convergence/stability results on
// low-dimensional manifolds where exact oracles exist. Every check embeds
// its configuration and seed so reports reproduce bit-for-bit.

namespace clear::theory {

struct ToyManifold {
    enum class Kind { Ball, Segment, Polytope, PointCloud };
    Kind kind = Kind::Ball;
    int dim = 2;
    std::vector<double> center;                 // ball
    double radius = 1.0;                        // ball
    std::vector<double> a, b;                   // segment endpoints
    std::vector<std::vector<double>> vertices;  // polytope / point-cloud

    static ToyManifold ball(std::vector<double> center, double radius);
    static ToyManifold segment(std::vector<double> a, std::vector<double> b);
    static ToyManifold polytope(std::vector<std::vector<double>> vertices);
    static ToyManifold point_cloud(std::vector<std::vector<double>> points);

    // axis-aligned bounds of the set, widened by margin
    std::pair<std::vector<double>, std::vector<double>> bounding_box(double margin) const;
};

const char* manifold_kind_name(ToyManifold::Kind k);

// Exact Euclidean distance to the set (hull for polytope/point-cloud).
double manifold_distance(const ToyManifold& m, const std::vector<double>& x);

// A point of the set attaining that distance.
std::vector<double> manifold_project(const ToyManifold& m, const std::vector<double>& x);

// Random point of the set (uniform for ball/segment, Dirichlet-weighted
// vertex mixture for hulls; full support either way).
std::vector<double> manifold_sample(const ToyManifold& m, Rng& rng);

struct VerificationReport {
    std::string name;
    bool pass = false;
    std::vector<std::pair<std::string, double>> stats;
    std::string config_echo;
    std::uint64_t seed = 0;

    double stat(const std::string& key) const;
    void add(const std::string& key, double value);
};

std::string report_text(const VerificationReport& report);

// Lipschitz and midpoint-convexity inequalities of the distance function
// over n random pairs from the bounding box, tolerance 1e-9.
VerificationReport verify_distance_properties(const ToyManifold& m, int n_pairs,
                                              std::uint64_t seed);

struct MinimaCheckConfig {
    int n_starts = 100;
    double eps = 0.1;          // endpoint distance band
    int budget = 300;          // descent steps
    double step = 0.05;        // descent step size
    int n_manifold = 200;      // fresh on-manifold samples
    int n_off = 200;           // off-manifold comparison samples
    double off_margin = 0.2;   // min distance for "off-manifold"
    double quantile = 0.1;     // off-manifold value quantile
    double frac_required = 0.9;
};

// Two-sided minima check: noise-free subgradient descents from random
// starts must land near the set, and fresh set samples must score below
// the low quantile of off-set values.
VerificationReport verify_minima_on_manifold(const icnn::ConvexNet& net, const ToyManifold& m,
                                             const MinimaCheckConfig& cfg, std::uint64_t seed);

// f(x) = ||x - target||^2 with the affine constraint x[sel] = value; the
// unique constrained minimizer is target with coordinate sel replaced.
struct SelectorInstance {
    int dim = 2;
    int sel = 0;
    double value = 5.0;
    std::vector<double> target;  // default (0, 2)
    icnn::ConvexNet f_net;       // f realized with network primitives

    std::vector<double> x_plus() const;
    Tensor project(const Tensor& x, double rhs) const;
};

SelectorInstance make_selector_instance();

struct ConvergenceCheckConfig {
    solver::PGDConfig pgd{500, solver::Schedule::Harmonic, 0.8};
    std::vector<double> start;  // projected before iterating; default origin
    double final_tol = 1e-3;
    double fejer_tol = 1e-10;
};

VerificationReport verify_pgd_convergence(const SelectorInstance& inst,
                                          const ConvergenceCheckConfig& cfg);

struct StabilityCheckConfig {
    ConvergenceCheckConfig base;
    std::vector<double> noise_levels = {0.0, 1e-3, 1e-2, 1e-1};
    int trials = 8;
    double e0_tol = 1e-3;
    double ratio_bound = 0.5;  // e(second level) / e(last level)
};

VerificationReport verify_stability(const SelectorInstance& inst,
                                    const StabilityCheckConfig& cfg, std::uint64_t seed);

}  // namespace clear::theory
