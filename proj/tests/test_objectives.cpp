#include <doctest.h>

#include <cmath>
#include <vector>

#include "a2r/error.hpp"
#include "a2r/objectives.hpp"

using namespace a2r;
using namespace a2r::objectives;

namespace {

Image filled(int w, int h, double v) {
    Image img(w, h);
    std::fill(img.data.begin(), img.data.end(), v);
    return img;
}

}  // namespace

TEST_CASE("adversarial loss") {
    const std::vector<double> half{0.5};
    CHECK(gan_loss({half, half}) == doctest::Approx(-1.386294).epsilon(1e-6));

    const std::vector<double> one{1.0}, zero{0.0};
    const double perfect = gan_loss({one, zero});
    CHECK(perfect < 0.0);
    CHECK(perfect > -1e-6);

    // Batch mean of two one-sample losses.
    const std::vector<double> r{0.9, 0.3}, f{0.2, 0.6};
    const double a = gan_loss({std::span(r).first(1), std::span(f).first(1)});
    const double b = gan_loss({std::span(r).last(1), std::span(f).last(1)});
    CHECK(gan_loss({r, f}) == doctest::Approx((a + b) / 2).epsilon(1e-12));

    const std::vector<double> empty;
    CHECK_THROWS_AS(gan_loss({empty, half}), Error);
    CHECK_THROWS_AS(gan_loss({half, empty}), Error);
    const std::vector<double> bad{1.5};
    CHECK_THROWS_AS(gan_loss({bad, half}), Error);
}

TEST_CASE("adversarial loss is maximal at the clamp corners") {
    const double best = gan_loss({std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 0.0}});
    for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j)
            for (int k = 0; k <= 4; ++k) {
                const std::vector<double> real{i / 20.0, 1.0 - k / 8.0};
                const std::vector<double> fake{j / 20.0, k / 8.0};
                CHECK(gan_loss({real, fake}) <= best);
            }
    CHECK(best == doctest::Approx(2 * std::log(1.0 - kProbabilityClamp)));
}

TEST_CASE("cycle loss") {
    const Image x = filled(4, 3, 0.0), rx = filled(4, 3, 0.5);
    const Image y = filled(5, 2, 0.3);
    CHECK(cycle_loss(x, x, y, y) == 0.0);
    CHECK(cycle_loss(x, rx, y, y) == doctest::Approx(0.5));
    CHECK(cycle_loss(y, y, x, rx) == cycle_loss(x, rx, y, y));
    CHECK(cycle_loss(x, rx, y, y, CycleNorm::L2) == doctest::Approx(0.25));
    CHECK_THROWS_AS(cycle_loss(x, y, y, y), Error);
    CHECK_THROWS_AS(cycle_loss(x, x, y, x), Error);
}

TEST_CASE("combined objectives") {
    CHECK(cca_loss(0, 0, 0) == 0.0);
    CHECK(cca_loss(-1.386, -1.386, 0.5) == doctest::Approx(-2.272));
    CHECK(cca_loss(-0.2, -1.1, 0.4) == cca_loss(-1.1, -0.2, 0.4));

    CHECK(full_loss(1.0, 2.0) == doctest::Approx(1.2));
    CHECK(full_loss(1.0, 2.0, {.lambda_cx = 0.0}) == 1.0);
    CHECK(full_loss(-2.272, 0.0) == -2.272);
    for (double cca : {-3.1, 0.0, 0.7}) CHECK(full_loss(cca, 123.4, {.lambda_cx = 0.0}) == cca);
    CHECK_THROWS_AS(full_loss(1.0, 1.0, {.lambda_cx = -0.1}), Error);

    // Linear in cxms with slope lambda.
    const double l0 = full_loss(0.5, 0.0), l1 = full_loss(0.5, 1.0), l2 = full_loss(0.5, 3.0);
    CHECK(l1 - l0 == doctest::Approx(kDefaultLambda));
    CHECK(l2 - l1 == doctest::Approx(2 * kDefaultLambda));
}

TEST_CASE("mask refresh schedule") {
    static_assert(mask_refresh_due(40) && mask_refresh_due(60) && mask_refresh_due(80));
    static_assert(!mask_refresh_due(39) && !mask_refresh_due(61) && !mask_refresh_due(0));
    static_assert(!mask_refresh_due(20));
    int due = 0;
    for (int e = 0; e <= 200; ++e) due += mask_refresh_due(e);
    CHECK(due == 9);
    CHECK(kDefaultLambda == 0.1);
}
