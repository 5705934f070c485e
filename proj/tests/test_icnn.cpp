#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "clear/icnn.hpp"
#include "clear/rng.hpp"

using namespace clear;

namespace {

icnn::ArchSpec tiny_arch() {
    icnn::ArchSpec a;
    a.height = a.width = 16;
    a.widths = {4, 4, 8, 8, 8, 8};
    a.pool = {true, true, true, true, false, false};  // 16 -> 1
    return a;
}

int first_clipped_layer(const icnn::ConvexNet& net) {
    for (std::size_t i = 0; i < net.clip_mask.size(); ++i)
        if (net.clip_mask[i].w && net.params[i].w.size()) return static_cast<int>(i);
    return -1;
}

}  // namespace

TEST_CASE("built nets satisfy midpoint convexity across seeds") {
    for (std::uint64_t seed : {0ull, 1ull, 2ull, 3ull}) {
        CAPTURE(seed);
        auto net = icnn::build(tiny_arch(), icnn::Mode::CLEAR, seed);
        auto rep = icnn::check_midpoint_convexity(net, 200, 1e-9, seed + 50);
        CHECK(rep.violations == 0);
    }
    icnn::MlpSpec mlp;
    mlp.input_dim = 3;
    mlp.hidden = {16, 16};
    for (std::uint64_t seed : {0ull, 7ull}) {
        auto net = icnn::build_mlp(mlp, icnn::Mode::CLEAR, seed);
        auto rep = icnn::check_midpoint_convexity(net, 2000, 1e-9, seed);
        CHECK(rep.violations == 0);
    }
}

TEST_CASE("planting a negative constrained weight breaks convexity detectably") {
    icnn::MlpSpec mlp;
    mlp.input_dim = 2;
    mlp.hidden = {8, 8};
    auto net = icnn::build_mlp(mlp, icnn::Mode::CLEAR, 4);
    int li = first_clipped_layer(net);
    REQUIRE(li >= 0);
    for (auto& v : net.params[li].w.data) v = -1.0;
    auto rep = icnn::check_midpoint_convexity(net, 2000, 1e-9, 5);
    CHECK(rep.violations > 0);
    CHECK(rep.max_violation > 0.0);
}

TEST_CASE("clip_weights is idempotent and leaves the first layer alone") {
    auto net = icnn::build(tiny_arch(), icnn::Mode::CLEAR, 9);
    int li = first_clipped_layer(net);
    REQUIRE(li >= 0);
    // Perturb a constrained layer negative, as an optimizer step would.
    Rng rng(1);
    rng.fill_normal(net.params[li].w, 1.0);

    CHECK(icnn::clip_weights(net));
    for (std::size_t i = 0; i < net.clip_mask.size(); ++i)
        if (net.clip_mask[i].w)
            for (double v : net.params[i].w.data) CHECK(v >= 0.0);

    auto snapshot = net.params;
    CHECK(icnn::clip_weights(net));
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        CHECK(net.params[i].w.data == snapshot[i].w.data);
        CHECK(net.params[i].b.data == snapshot[i].b.data);
    }

    // The unconstrained first layer keeps its negative entries.
    int first = -1;
    for (std::size_t i = 0; i < net.params.size(); ++i)
        if (net.params[i].w.size()) { first = static_cast<int>(i); break; }
    REQUIRE(first >= 0);
    CHECK_FALSE(net.clip_mask[first].w);
    CHECK(std::any_of(net.params[first].w.data.begin(), net.params[first].w.data.end(),
                      [](double v) { return v < 0.0; }));
}

TEST_CASE("UNCLEAR mode refuses to clip") {
    auto net = icnn::build(tiny_arch(), icnn::Mode::UNCLEAR, 2);
    auto before = net.params;
    CHECK_FALSE(icnn::clip_weights(net));
    for (std::size_t i = 0; i < net.params.size(); ++i)
        CHECK(net.params[i].w.data == before[i].w.data);
}

TEST_CASE("arch descriptions round-trip through text") {
    icnn::ArchDesc conv;
    conv.family = icnn::ArchDesc::Family::Conv;
    conv.conv = tiny_arch();
    conv.conv.slope = 0.15;
    auto conv2 = icnn::arch_from_text(icnn::arch_to_text(conv));
    CHECK(conv2.family == icnn::ArchDesc::Family::Conv);
    CHECK(conv2.conv.channels == conv.conv.channels);
    CHECK(conv2.conv.height == conv.conv.height);
    CHECK(conv2.conv.width == conv.conv.width);
    CHECK(conv2.conv.widths == conv.conv.widths);
    CHECK(conv2.conv.three_conv == conv.conv.three_conv);
    CHECK(conv2.conv.pool == conv.conv.pool);
    CHECK(conv2.conv.slope == doctest::Approx(conv.conv.slope));

    icnn::ArchDesc mlp;
    mlp.family = icnn::ArchDesc::Family::Mlp;
    mlp.mlp.input_dim = 7;
    mlp.mlp.hidden = {5, 3, 2};
    mlp.mlp.slope = 0.3;
    auto mlp2 = icnn::arch_from_text(icnn::arch_to_text(mlp));
    CHECK(mlp2.family == icnn::ArchDesc::Family::Mlp);
    CHECK(mlp2.mlp.input_dim == 7);
    CHECK(mlp2.mlp.hidden == mlp.mlp.hidden);
    CHECK(mlp2.mlp.slope == doctest::Approx(0.3));

    CHECK_THROWS(icnn::arch_from_text("gibberish"));
}

TEST_CASE("build is seed-deterministic and build_desc matches build") {
    auto a = icnn::build(tiny_arch(), icnn::Mode::CLEAR, 31);
    auto b = icnn::build(tiny_arch(), icnn::Mode::CLEAR, 31);
    auto c = icnn::build(tiny_arch(), icnn::Mode::CLEAR, 32);
    REQUIRE(a.params.size() == b.params.size());
    bool all_same = true, any_diff = false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        all_same = all_same && a.params[i].w.data == b.params[i].w.data;
        any_diff = any_diff || a.params[i].w.data != c.params[i].w.data;
    }
    CHECK(all_same);
    CHECK(any_diff);

    icnn::ArchDesc desc;
    desc.family = icnn::ArchDesc::Family::Conv;
    desc.conv = tiny_arch();
    auto d = icnn::build_desc(desc, icnn::Mode::CLEAR, 31);
    Tensor x({2, 16, 16});
    Rng rng(8);
    rng.fill_normal(x, 1.0);
    CHECK(icnn::forward(a, x) == icnn::forward(d, x));
    CHECK(a.input_shape == std::vector<int>{2, 16, 16});
}

TEST_CASE("input_gradient matches finite differences and param_count adds up") {
    icnn::MlpSpec mlp;
    mlp.input_dim = 4;
    mlp.hidden = {8};
    auto net = icnn::build_mlp(mlp, icnn::Mode::CLEAR, 6);
    CHECK(icnn::param_count(net) == ad::param_count(net.params));
    // first linear 4->8 (+8 bias), second 8->1 (+1 bias)
    CHECK(icnn::param_count(net) == 4 * 8 + 8 + 8 + 1);

    Tensor x({4}, {0.3, -0.7, 1.1, 0.05});
    auto g = icnn::input_gradient(net, x);
    REQUIRE(g.shape == x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor hi = x, lo = x;
        hi[i] += 1e-6;
        lo[i] -= 1e-6;
        double num = (icnn::forward(net, hi) - icnn::forward(net, lo)) / 2e-6;
        CHECK(g[i] == doctest::Approx(num).epsilon(1e-4));
    }
}

TEST_CASE("mode_name strings") {
    CHECK(std::string(icnn::mode_name(icnn::Mode::CLEAR)) == "CLEAR");
    CHECK(std::string(icnn::mode_name(icnn::Mode::UNCLEAR)) == "UNCLEAR");
}
