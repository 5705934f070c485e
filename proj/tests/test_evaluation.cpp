#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "clear/evaluation.hpp"
#include "clear/rng.hpp"

using namespace clear;

namespace {

Tensor const_image(int h, int w, double re) {
    Tensor x({2, h, w});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) x.at(0, y, xx) = re;
    return x;
}

// Naive SSIM oracle: same constants and 8x8 sliding windows, written as
// plain per-window statistics.
double ssim_oracle(const Tensor& ref, const Tensor& test) {
    const int h = ref.shape[0], w = ref.shape[1], win = 8;
    double peak = 0;
    for (double v : ref.data) peak = std::max(peak, std::abs(v));
    if (peak == 0) peak = 1.0;
    const double c1 = 0.01 * peak * 0.01 * peak, c2 = 0.03 * peak * 0.03 * peak;
    double total = 0;
    int count = 0;
    for (int y = 0; y + win <= h; ++y)
        for (int x = 0; x + win <= w; ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    ma += ref.data[(y + i) * w + (x + j)];
                    mb += test.data[(y + i) * w + (x + j)];
                }
            ma /= win * win;
            mb /= win * win;
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    double da = ref.data[(y + i) * w + (x + j)] - ma;
                    double db = test.data[(y + i) * w + (x + j)] - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            va /= win * win;
            vb /= win * win;
            cov /= win * win;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

}  // namespace

TEST_CASE("magnitude, nmse and psnr against hand values") {
    Tensor img({2, 1, 2});
    img.at(0, 0, 0) = 3.0;
    img.at(1, 0, 0) = 4.0;
    img.at(0, 0, 1) = -1.0;
    auto mag = metrics::magnitude_image(img);
    REQUIRE(mag.shape == std::vector<int>{1, 2});
    CHECK(mag[0] == doctest::Approx(5.0));
    CHECK(mag[1] == doctest::Approx(1.0));

    // MSE = peak^2/4 gives psnr = 10*log10(4) = 6.0206 dB.
    Tensor ref({4}, {1.0, 1.0, 1.0, 1.0});
    Tensor test({4}, {0.5, 0.5, 0.5, 0.5});
    CHECK(metrics::psnr(ref, test, 1.0) == doctest::Approx(6.020599913).epsilon(1e-9));
    CHECK(metrics::nmse(ref, test) == doctest::Approx(0.25));
    CHECK(metrics::nmse(ref, ref) == 0.0);
    CHECK(metrics::psnr(ref, ref, 1.0) == 200.0);

    Tensor t2({4}, {1.0, 1.0, 1.0, 3.0});
    CHECK(metrics::nmse(ref, t2) == doctest::Approx(1.0));
}

TEST_CASE("ssim equals the naive oracle and is 1 on identical images") {
    Rng rng(4);
    Tensor a({16, 16}), b({16, 16});
    for (auto& v : a.data) v = 0.5 + 0.2 * rng.normal(1.0);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = a[i] + 0.05 * rng.normal(1.0);
    CHECK(metrics::ssim(a, a) == doctest::Approx(1.0));
    CHECK(metrics::ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-10));
    CHECK(metrics::ssim(a, b) < 1.0);
}

TEST_CASE("phantoms are in range, typed and deterministic") {
    for (auto kind : {eval::PhantomKind::Ellipses, eval::PhantomKind::PiecewiseConstant,
                      eval::PhantomKind::SheppLoganLike}) {
        CAPTURE(eval::phantom_kind_name(kind));
        auto p = eval::make_phantom(kind, 32, 3);
        REQUIRE(p.shape == std::vector<int>{2, 32, 32});
        double lo = 1e9, hi = -1e9;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                lo = std::min(lo, p.at(0, y, x));
                hi = std::max(hi, p.at(0, y, x));
                CHECK(p.at(1, y, x) == 0.0);
            }
        CHECK(lo >= 0.0);
        CHECK(hi <= 1.0);
        CHECK(hi > 0.1);  // not blank

        auto q = eval::make_phantom(kind, 32, 3);
        CHECK(p.data == q.data);
        auto r = eval::make_phantom(kind, 32, 4);
        CHECK(p.data != r.data);
    }
    CHECK(eval::phantom_kind_from_name("shepp-logan-like") == eval::PhantomKind::SheppLoganLike);
    CHECK_THROWS(eval::phantom_kind_from_name("brain"));
}

TEST_CASE("tv_value: zero on constants, hand value on a step") {
    CHECK(eval::tv_value(const_image(8, 8, 0.7)) == 0.0);
    // Single vertical step of height 1 across an 8-row image: the forward
    // difference is 1 at the 8 pixels left of the boundary.
    Tensor img({2, 8, 8});
    for (int y = 0; y < 8; ++y)
        for (int x = 4; x < 8; ++x) img.at(0, y, x) = 1.0;
    CHECK(eval::tv_value(img) == doctest::Approx(8.0));
}

TEST_CASE("tv_reconstruct with weight 0 and a full mask returns the data") {
    fm::SamplingMask mask;
    mask.height = mask.width = 16;
    mask.keep.assign(256, 1);
    auto truth = eval::make_phantom(eval::PhantomKind::PiecewiseConstant, 16, 8);
    auto b = fm::apply_A(mask, truth);
    auto rec = eval::tv_reconstruct(mask, b, 0.0, 30);
    CHECK(norm2(rec - truth) < 1e-8);
}

TEST_CASE("tv_reconstruct denoises an undersampled piecewise-constant image") {
    auto truth = eval::make_phantom(eval::PhantomKind::PiecewiseConstant, 32, 5);
    auto mask = fm::make_mask(fm::MaskKind::Random1d, 32, 32, 2.0, 0.12, 2);
    auto b = fm::apply_A(mask, truth);
    auto zf = fm::apply_A_adjoint(mask, b);
    auto rec = eval::tv_reconstruct(mask, b, 0.02, 60);

    auto tm = metrics::magnitude_image(truth);
    double nm_zf = metrics::nmse(tm, metrics::magnitude_image(zf));
    double nm_tv = metrics::nmse(tm, metrics::magnitude_image(rec));
    CHECK(nm_tv < nm_zf);

    // The objective must not exceed the zero-filled starting value.
    CHECK(eval::tv_objective(mask, b, rec, 0.02) <=
          eval::tv_objective(mask, b, zf, 0.02) + 1e-12);
}

TEST_CASE("evaluate_suite produces per-image and aggregate rows for every method") {
    std::vector<Tensor> data;
    for (int i = 0; i < 3; ++i)
        data.push_back(eval::make_phantom(eval::PhantomKind::Ellipses, 16, 20 + i));

    train::TrainConfig tc;
    tc.arch.family = icnn::ArchDesc::Family::Conv;
    tc.arch.conv.height = tc.arch.conv.width = 16;
    tc.arch.conv.widths = {4, 4, 8, 8, 8, 8};
    tc.arch.conv.pool = {true, true, true, true, false, false};
    tc.epochs = 0;
    auto ck = train::train(data, tc).checkpoint;

    eval::EvalConfig cfg;
    cfg.masks = {fm::make_mask(fm::MaskKind::Uniform1d, 16, 16, 2.0, 0.1, 0)};
    cfg.pgd.max_iters = 5;
    cfg.tv_iters = 10;
    auto rows = eval::evaluate_suite({ck}, data, cfg);

    // 3 methods x (3 images + 1 aggregate).
    REQUIRE(rows.size() == 12);
    int per_image = 0, aggregate = 0;
    bool saw_clear = false;
    for (const auto& r : rows) {
        (r.aggregate ? aggregate : per_image)++;
        if (r.method == "CLEAR") saw_clear = true;
        if (r.aggregate) CHECK(r.image_id == -1);
        CHECK(std::isfinite(r.nmse));
        CHECK(std::isfinite(r.psnr_db));
        CHECK(r.mask.find("uniform-1d") == 0);
    }
    CHECK(per_image == 9);
    CHECK(aggregate == 3);
    CHECK(saw_clear);

    // Duplicate modes are rejected.
    CHECK_THROWS(eval::evaluate_suite({ck, ck}, data, cfg));

    // Determinism end to end.
    auto rows2 = eval::evaluate_suite({ck}, data, cfg);
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].nmse == rows2[i].nmse);
        CHECK(rows[i].psnr_db == rows2[i].psnr_db);
    }
}
