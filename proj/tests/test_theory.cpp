#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "clear/theory.hpp"

using namespace clear;

namespace {

double dist(const theory::ToyManifold& m, std::initializer_list<double> x) {
    return theory::manifold_distance(m, std::vector<double>(x));
}

}  // namespace

TEST_CASE("distances to ball, segment and triangle match hand-derived values") {
    auto ball = theory::ToyManifold::ball({0.0, 0.0}, 1.0);
    CHECK(dist(ball, {0.0, 0.0}) == 0.0);
    CHECK(dist(ball, {0.5, 0.0}) == 0.0);
    CHECK(dist(ball, {2.0, 0.0}) == doctest::Approx(1.0));
    CHECK(dist(ball, {3.0, 4.0}) == doctest::Approx(4.0));

    auto shifted = theory::ToyManifold::ball({1.0, -1.0}, 0.5);
    CHECK(dist(shifted, {1.0, 1.0}) == doctest::Approx(1.5));

    auto seg = theory::ToyManifold::segment({-1.0, 0.0}, {1.0, 0.0});
    CHECK(dist(seg, {0.3, 0.0}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(dist(seg, {0.0, 2.0}) == doctest::Approx(2.0));
    CHECK(dist(seg, {2.0, 0.0}) == doctest::Approx(1.0));
    CHECK(dist(seg, {-2.0, 1.0}) == doctest::Approx(std::sqrt(2.0)));

    auto tri = theory::ToyManifold::polytope({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    CHECK(dist(tri, {0.25, 0.25}) == 0.0);          // interior
    CHECK(dist(tri, {0.5, -1.0}) == doctest::Approx(1.0));  // below an edge
    CHECK(dist(tri, {2.0, 0.0}) == doctest::Approx(1.0));   // beyond a vertex
    CHECK(dist(tri, {1.0, 1.0}) == doctest::Approx(std::sqrt(0.5)));  // hypotenuse

    auto cloud = theory::ToyManifold::point_cloud({{0.0, 0.0}, {2.0, 0.0}});
    // Hull of two points is the connecting segment.
    CHECK(dist(cloud, {1.0, 0.0}) == doctest::Approx(0.0));
    CHECK(dist(cloud, {1.0, 3.0}) == doctest::Approx(3.0));
}

TEST_CASE("manifold_project attains the distance and lands in the set") {
    Rng rng(3);
    auto tri = theory::ToyManifold::polytope({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    auto seg = theory::ToyManifold::segment({-1.0, -1.0}, {2.0, 0.5});
    auto ball = theory::ToyManifold::ball({0.5, 0.5}, 2.0);
    for (const auto& m : {tri, seg, ball}) {
        for (int i = 0; i < 200; ++i) {
            std::vector<double> x = {rng.normal(3.0), rng.normal(3.0)};
            auto p = theory::manifold_project(m, x);
            double d = theory::manifold_distance(m, x);
            double dp = std::hypot(x[0] - p[0], x[1] - p[1]);
            CHECK(dp == doctest::Approx(d).epsilon(1e-9));
            CHECK(theory::manifold_distance(m, p) < 1e-9);
        }
    }
}

TEST_CASE("projection is the nearest point against dense boundary sampling") {
    auto tri = theory::ToyManifold::polytope({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> x = {rng.normal(2.0), rng.normal(2.0)};
        double d = theory::manifold_distance(tri, x);
        // Dense sweep over the three edges.
        double best = 1e30;
        auto edge = [&](double ax, double ay, double bx, double by) {
            for (int k = 0; k <= 2000; ++k) {
                double t = k / 2000.0;
                best = std::min(best, std::hypot(x[0] - (ax + t * (bx - ax)),
                                                 x[1] - (ay + t * (by - ay))));
            }
        };
        edge(0, 0, 1, 0);
        edge(1, 0, 0, 1);
        edge(0, 1, 0, 0);
        if (theory::manifold_distance(tri, x) == 0.0) continue;
        CHECK(d == doctest::Approx(best).epsilon(1e-5));
    }
}

TEST_CASE("manifold_sample stays in the set and spreads over it") {
    Rng rng(11);
    auto ball = theory::ToyManifold::ball({0.0, 0.0}, 1.0);
    int outer = 0;
    for (int i = 0; i < 2000; ++i) {
        auto s = theory::manifold_sample(ball, rng);
        double r = std::hypot(s[0], s[1]);
        CHECK(r <= 1.0 + 1e-12);
        if (r > 0.5) ++outer;
    }
    // Uniform on the disc puts 3/4 of the mass outside r = 1/2.
    CHECK(outer > 1300);
    CHECK(outer < 1700);

    auto seg = theory::ToyManifold::segment({-1.0, 0.0}, {1.0, 0.0});
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 500; ++i) {
        auto s = theory::manifold_sample(seg, rng);
        CHECK(std::abs(s[1]) < 1e-12);
        lo = std::min(lo, s[0]);
        hi = std::max(hi, s[0]);
    }
    CHECK(lo < -0.9);
    CHECK(hi > 0.9);
}

TEST_CASE("distance function certification passes on every kind") {
    auto ball = theory::ToyManifold::ball({0.0, 0.0}, 1.0);
    auto seg = theory::ToyManifold::segment({-1.0, 0.0}, {1.0, 0.0});
    auto tri = theory::ToyManifold::polytope({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    for (const auto& m : {ball, seg, tri}) {
        auto rep = theory::verify_distance_properties(m, 2000, 7);
        CHECK(rep.pass);
        CHECK(rep.stat("lipschitz_violations") == 0.0);
        CHECK(rep.stat("midpoint_violations") == 0.0);
    }
}

TEST_CASE("selector instance: net value, projection and minimizer") {
    auto inst = theory::make_selector_instance();
    REQUIRE(inst.dim == 2);
    // f(x) = x0^2 + (x1-2)^2 realized with network primitives.
    Tensor x({2}, {1.0, 1.0});
    CHECK(icnn::forward(inst.f_net, x) == doctest::Approx(1.0 + 1.0).epsilon(1e-12));
    Tensor y({2}, {-3.0, 5.0});
    CHECK(icnn::forward(inst.f_net, y) == doctest::Approx(9.0 + 9.0).epsilon(1e-12));
    CHECK(icnn::check_midpoint_convexity(inst.f_net, 500, 1e-9, 2).violations == 0);

    auto p = inst.project(Tensor({2}, {1.0, 7.0}), inst.value);
    CHECK(p[0] == doctest::Approx(inst.value));
    CHECK(p[1] == doctest::Approx(7.0));

    auto xp = inst.x_plus();
    CHECK(xp[0] == doctest::Approx(5.0));
    CHECK(xp[1] == doctest::Approx(2.0));
}

TEST_CASE("pgd convergence certificate on the selector instance") {
    auto inst = theory::make_selector_instance();
    theory::ConvergenceCheckConfig cfg;
    auto rep = theory::verify_pgd_convergence(inst, cfg);
    CHECK(rep.pass);
    CHECK(rep.stat("final_err") < 1e-3);
    CHECK(rep.stat("max_fejer_excess") <= 1e-10);

    // A frozen schedule cannot reach the minimizer: the check must fail.
    theory::ConvergenceCheckConfig frozen;
    frozen.pgd.schedule = solver::Schedule::Constant;
    frozen.pgd.c = 0.0;
    auto bad = theory::verify_pgd_convergence(inst, frozen);
    CHECK_FALSE(bad.pass);
    CHECK(bad.stat("final_err") > 1e-3);
}

TEST_CASE("stability check: errors grow monotonically from near zero") {
    auto inst = theory::make_selector_instance();
    theory::StabilityCheckConfig cfg;
    cfg.trials = 4;
    auto rep = theory::verify_stability(inst, cfg, 5);
    CHECK(rep.pass);
    CHECK(rep.stat("monotone") == 1.0);
    CHECK(rep.stat("e_0") < 1e-3);
    CHECK(rep.stat("small_to_large_ratio") < 0.5);
    // Fitted sensitivity stays bounded: e(delta) ~ C*delta.
    CHECK(rep.stat("C_fit") > 0.0);

    // Reports reproduce bit-for-bit under the same seed.
    auto rep2 = theory::verify_stability(inst, cfg, 5);
    CHECK(theory::report_text(rep) == theory::report_text(rep2));
}

TEST_CASE("report accessors") {
    theory::VerificationReport r;
    r.name = "x";
    r.add("alpha", 1.5);
    CHECK(r.stat("alpha") == 1.5);
    CHECK_THROWS(r.stat("beta"));
}
