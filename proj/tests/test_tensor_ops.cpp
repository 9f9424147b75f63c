#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "plotbot/layers.hpp"
#include "plotbot/rng.hpp"

// Gradient checks run in double against central finite differences so the
// 1e-4 relative-error bar is meaningful; the pipeline itself uses float.

using plotbot::Rng;
using plotbot::nn::LayerSpecT;
using plotbot::nn::TensorT;

using T = TensorT<double>;
using Spec = LayerSpecT<double>;

namespace {

constexpr double kFdStep = 1e-3;
constexpr double kRelTol = 1e-4;

T random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0,
                double hi = 1.0) {
    T t(n, c, h, w);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// weighted-sum loss so every output element gets a distinct cotangent
double loss_of(const T& y, const std::vector<double>& wts) {
    double acc = 0;
    for (size_t i = 0; i < y.data.size(); ++i) acc += wts[i] * y.data[i];
    return acc;
}

std::vector<double> loss_weights(size_t n, Rng& rng) {
    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return w;
}

T cotangent(const T& like, const std::vector<double>& wts) {
    T g(like.n, like.c, like.h, like.w);
    g.data.assign(wts.begin(), wts.end());
    return g;
}

void check_rel(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(std::abs(analytic - numeric) / denom < kRelTol);
}

// central finite difference of f w.r.t. one scalar slot
double fd(std::function<double(double)> f, double x0) {
    return (f(x0 + kFdStep) - f(x0 - kFdStep)) / (2 * kFdStep);
}

}  // namespace

TEST_CASE("conv2d: identity kernel reproduces input") {
    T x(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) x.data[i] = i + 1;
    Spec s = Spec::conv(1, 1, 1, 1);
    s.kernel[0] = 1.0;
    const T y = plotbot::nn::conv2d(x, s);
    CHECK(y.data == x.data);
}

TEST_CASE("conv2d: all-ones 3x3 kernel with pad 1, center sums the image") {
    T x(1, 1, 3, 3);
    const double vals[9] = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    x.data.assign(vals, vals + 9);
    Spec s = Spec::conv(1, 1, 3, 3, 1, 1);
    for (auto& k : s.kernel) k = 1.0;
    const T y = plotbot::nn::conv2d(x, s);
    CHECK(y.h == 3);
    CHECK(y.w == 3);
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx(45.0));
}

TEST_CASE("conv2d: zero kernel gives constant bias output") {
    Rng rng(3);
    const T x = random_tensor(2, 3, 4, 4, rng);
    Spec s = Spec::conv(2, 3, 3, 3, 1, 1);
    s.bias[0] = 0.25;
    s.bias[1] = -1.5;
    const T y = plotbot::nn::conv2d(x, s);
    for (int n = 0; n < 2; ++n)
        for (int oc = 0; oc < 2; ++oc)
            for (int i = 0; i < 16; ++i)
                CHECK(y.at(n, oc, i / 4, i % 4) == doctest::Approx(s.bias[oc]));
}

TEST_CASE("conv2d is linear in the input for fixed kernel") {
    Rng rng(5);
    const T x = random_tensor(1, 2, 5, 5, rng);
    const T y = random_tensor(1, 2, 5, 5, rng);
    Spec s = Spec::conv(3, 2, 3, 3, 1, 1);
    for (auto& k : s.kernel) k = rng.uniform(-1, 1);
    for (auto& b : s.bias) b = rng.uniform(-1, 1);
    const double a = 0.7, bb = -1.3;
    T combo(1, 2, 5, 5);
    for (size_t i = 0; i < combo.size(); ++i)
        combo.data[i] = a * x.data[i] + bb * y.data[i];
    const T out_combo = plotbot::nn::conv2d(combo, s);
    const T out_x = plotbot::nn::conv2d(x, s);
    const T out_y = plotbot::nn::conv2d(y, s);
    // subtract the bias over-count: a*conv(x) + b*conv(y) counts it (a+b)x
    for (int oc = 0; oc < 3; ++oc)
        for (int p = 0; p < 25; ++p) {
            const double expect = a * out_x.at(0, oc, p / 5, p % 5) +
                                  bb * out_y.at(0, oc, p / 5, p % 5) -
                                  (a + bb - 1) * s.bias[oc];
            CHECK(out_combo.at(0, oc, p / 5, p % 5) ==
                  doctest::Approx(expect).epsilon(1e-6));
        }
}

TEST_CASE("conv2d shape errors") {
    T x(1, 2, 4, 4);
    Spec s = Spec::conv(1, 3, 3, 3);
    CHECK_THROWS_AS(plotbot::nn::conv2d(x, s), plotbot::ShapeError);
    Spec big = Spec::conv(1, 2, 9, 9);
    CHECK_THROWS_AS(plotbot::nn::conv2d(x, big), plotbot::ShapeError);
}

TEST_CASE("conv2d_backward matches finite differences (incl. stride + pad)") {
    Rng rng(7);
    for (int stride : {1, 2}) {
        T x = random_tensor(2, 2, 6, 6, rng);
        Spec s = Spec::conv(3, 2, 3, 3, stride, 1);
        for (auto& k : s.kernel) k = rng.uniform(-1, 1);
        for (auto& b : s.bias) b = rng.uniform(-1, 1);
        const T y0 = plotbot::nn::conv2d(x, s);
        const auto wts = loss_weights(y0.size(), rng);
        const auto g = plotbot::nn::conv2d_backward(cotangent(y0, wts), x, s);

        for (size_t i = 0; i < x.size(); i += 7) {
            const double num = fd(
                [&](double v) {
                    T xp = x;
                    xp.data[i] = v;
                    return loss_of(plotbot::nn::conv2d(xp, s), wts);
                },
                x.data[i]);
            check_rel(g.input.data[i], num);
        }
        for (size_t i = 0; i < s.kernel.size(); i += 5) {
            const double num = fd(
                [&](double v) {
                    Spec sp = s;
                    sp.kernel[i] = v;
                    return loss_of(plotbot::nn::conv2d(x, sp), wts);
                },
                s.kernel[i]);
            check_rel(g.kernel[i], num);
        }
        for (size_t i = 0; i < s.bias.size(); ++i) {
            const double num = fd(
                [&](double v) {
                    Spec sp = s;
                    sp.bias[i] = v;
                    return loss_of(plotbot::nn::conv2d(x, sp), wts);
                },
                s.bias[i]);
            check_rel(g.bias[i], num);
        }
    }
}

TEST_CASE("conv2d_backward: zero cotangent gives zero grads, bias grad sums") {
    Rng rng(11);
    T x = random_tensor(1, 1, 4, 4, rng);
    Spec s = Spec::conv(2, 1, 3, 3, 1, 1);
    for (auto& k : s.kernel) k = rng.uniform(-1, 1);
    const T y = plotbot::nn::conv2d(x, s);

    T zero(y.n, y.c, y.h, y.w);
    auto g0 = plotbot::nn::conv2d_backward(zero, x, s);
    for (double v : g0.input.data) CHECK(v == 0.0);
    for (double v : g0.kernel) CHECK(v == 0.0);
    for (double v : g0.bias) CHECK(v == 0.0);

    T ones(y.n, y.c, y.h, y.w, 1.0);
    auto g1 = plotbot::nn::conv2d_backward(ones, x, s);
    CHECK(g1.bias[0] == doctest::Approx(16.0));  // per-channel sum of grad_out
    CHECK(g1.bias[1] == doctest::Approx(16.0));
}

TEST_CASE("relu forward/backward") {
    T x(1, 1, 1, 3);
    x.data = {-1, 0, 2};
    const T y = plotbot::nn::relu(x);
    CHECK(y.data == std::vector<double>{0, 0, 2});

    Rng rng(13);
    // FD check away from the kink (|x| > 1e-3)
    T xr = random_tensor(1, 2, 4, 4, rng);
    for (auto& v : xr.data)
        if (std::abs(v) < 5e-3) v = 0.1;
    const T yr = plotbot::nn::relu(xr);
    const auto wts = loss_weights(yr.size(), rng);
    const T g = plotbot::nn::relu_backward(cotangent(yr, wts), xr);
    for (size_t i = 0; i < xr.size(); i += 3) {
        const double num = fd(
            [&](double v) {
                T xp = xr;
                xp.data[i] = v;
                return loss_of(plotbot::nn::relu(xp), wts);
            },
            xr.data[i]);
        check_rel(g.data[i], num);
    }
}

TEST_CASE("upsample2x: replication, backward block sum, mean-pool inverse") {
    T x(1, 1, 1, 1);
    x.data = {7};
    const T y = plotbot::nn::nearest_upsample2x(x);
    CHECK(y.h == 2);
    CHECK(y.w == 2);
    for (double v : y.data) CHECK(v == 7.0);

    T gy(1, 1, 2, 2, 1.0);
    const T gx = plotbot::nn::nearest_upsample2x_backward(gy, x);
    CHECK(gx.data[0] == 4.0);

    Rng rng(17);
    const T big = random_tensor(2, 3, 4, 5, rng);
    const T up = plotbot::nn::nearest_upsample2x(big);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int iy = 0; iy < 4; ++iy)
                for (int ix = 0; ix < 5; ++ix) {
                    const double mean = (up.at(n, c, 2 * iy, 2 * ix) +
                                         up.at(n, c, 2 * iy, 2 * ix + 1) +
                                         up.at(n, c, 2 * iy + 1, 2 * ix) +
                                         up.at(n, c, 2 * iy + 1, 2 * ix + 1)) /
                                        4.0;
                    CHECK(mean == doctest::Approx(big.at(n, c, iy, ix)));
                }
}

TEST_CASE("reflection_pad: row reflection, width 0 identity, FD check") {
    T x(1, 1, 1, 3);
    x.data = {1, 2, 3};
    // height 1 cannot reflect; use a 3x3 and check the middle row
    T sq(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) sq.data[i] = (i / 3 == 1) ? (i % 3) + 1 : 0;
    const T padded = plotbot::nn::reflection_pad(sq, 1);
    CHECK(padded.w == 5);
    const int row = 2;  // original middle row
    std::vector<double> got;
    for (int ix = 0; ix < 5; ++ix) got.push_back(padded.at(0, 0, row, ix));
    CHECK(got == std::vector<double>{2, 1, 2, 3, 2});

    const T same = plotbot::nn::reflection_pad(sq, 0);
    CHECK(same.data == sq.data);

    CHECK_THROWS_AS(plotbot::nn::reflection_pad(sq, 3), plotbot::UsageError);

    Rng rng(19);
    T xr = random_tensor(1, 2, 4, 4, rng);
    const T yr = plotbot::nn::reflection_pad(xr, 1);
    const auto wts = loss_weights(yr.size(), rng);
    const T g = plotbot::nn::reflection_pad_backward(cotangent(yr, wts), xr, 1);
    for (size_t i = 0; i < xr.size(); i += 3) {
        const double num = fd(
            [&](double v) {
                T xp = xr;
                xp.data[i] = v;
                return loss_of(plotbot::nn::reflection_pad(xp, 1), wts);
            },
            xr.data[i]);
        check_rel(g.data[i], num);
    }
}

TEST_CASE("channel_moments: hand values and FD check") {
    T c5(1, 1, 2, 2, 5.0);
    auto m = plotbot::nn::channel_moments(c5);
    CHECK(m.mu.data[0] == doctest::Approx(5.0));
    CHECK(m.sigma.data[0] == doctest::Approx(std::sqrt(plotbot::nn::kMomentEps)));

    T two(1, 1, 1, 2);
    two.data = {1, 3};
    m = plotbot::nn::channel_moments(two);
    CHECK(m.mu.data[0] == doctest::Approx(2.0));
    CHECK(m.sigma.data[0] ==
          doctest::Approx(std::sqrt(1.0 + plotbot::nn::kMomentEps)));

    Rng rng(23);
    T x = random_tensor(2, 3, 4, 4, rng);
    const auto wmu = loss_weights(6, rng);
    const auto wsg = loss_weights(6, rng);
    T gmu(2, 3, 1, 1), gsg(2, 3, 1, 1);
    gmu.data.assign(wmu.begin(), wmu.end());
    gsg.data.assign(wsg.begin(), wsg.end());
    const T g = plotbot::nn::channel_moments_backward(gmu, gsg, x);
    auto scalar_loss = [&](const T& xp) {
        const auto mm = plotbot::nn::channel_moments(xp);
        double acc = 0;
        for (size_t i = 0; i < 6; ++i)
            acc += wmu[i] * mm.mu.data[i] + wsg[i] * mm.sigma.data[i];
        return acc;
    };
    for (size_t i = 0; i < x.size(); i += 5) {
        const double num = fd(
            [&](double v) {
                T xp = x;
                xp.data[i] = v;
                return scalar_loss(xp);
            },
            x.data[i]);
        check_rel(g.data[i], num);
    }
}

TEST_CASE("adam: zero grad no-op, single-step magnitude, dim errors") {
    using State = plotbot::nn::AdamStateT<double>;
    std::vector<double> p{1.0, -2.0};
    State st(2, 0.01);
    plotbot::nn::adam_update(p, {0.0, 0.0}, st);
    CHECK(p == std::vector<double>{1.0, -2.0});
    CHECK(st.step == 1);

    // single scalar, g = 1: bias-corrected first step is lr * 1/(1 + eps')
    std::vector<double> q{5.0};
    State st2(1, 0.01);
    plotbot::nn::adam_update(q, {1.0}, st2);
    CHECK(q[0] == doctest::Approx(5.0 - 0.01).epsilon(1e-5));

    std::vector<double> bad{1.0};
    CHECK_THROWS_AS(plotbot::nn::adam_update(bad, {1.0, 2.0}, st2),
                    plotbot::ShapeError);
}

TEST_CASE("adam: two identical runs are bit-identical") {
    using State = plotbot::nn::AdamStateT<double>;
    Rng rng(29);
    std::vector<double> grads(8);
    for (auto& g : grads) g = rng.uniform(-1, 1);
    auto run = [&]() {
        std::vector<double> p(8, 0.5);
        State st(8, 0.003);
        for (int i = 0; i < 20; ++i) plotbot::nn::adam_update(p, grads, st);
        return p;
    };
    CHECK(run() == run());
}

TEST_CASE("ops are pure: inputs not mutated") {
    Rng rng(31);
    const T x = random_tensor(1, 2, 4, 4, rng);
    const T snapshot = x;
    Spec s = Spec::conv(2, 2, 3, 3, 1, 1);
    for (auto& k : s.kernel) k = rng.uniform(-1, 1);
    (void)plotbot::nn::conv2d(x, s);
    (void)plotbot::nn::relu(x);
    (void)plotbot::nn::nearest_upsample2x(x);
    (void)plotbot::nn::reflection_pad(x, 1);
    (void)plotbot::nn::channel_moments(x);
    CHECK(x.data == snapshot.data);
}
