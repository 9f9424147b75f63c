#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "plotbot/rng.hpp"
#include "plotbot/stylenet.hpp"

using plotbot::Rng;
using plotbot::nn::TensorT;
namespace style = plotbot::style;

using T = TensorT<double>;
using Tf = plotbot::nn::Tensor;

namespace {

T random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0,
                double hi = 1.0) {
    T t(n, c, h, w);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tf random_tensor_f(int n, int c, int h, int w, Rng& rng, double lo = 0.0,
                   double hi = 1.0) {
    Tf t(n, c, h, w);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// tiny double-precision encoder/decoder pair for finite-difference work
style::EncoderT<double> tiny_encoder(Rng& rng) {
    using L = plotbot::nn::LayerSpecT<double>;
    style::EncoderT<double> enc;
    auto conv = [&](int oc, int ic, int stride) {
        L l = L::conv(oc, ic, 3, 3, stride, 0);
        const double lim = std::sqrt(6.0 / (ic * 9));
        for (auto& k : l.kernel) k = rng.uniform(-lim, lim);
        return l;
    };
    enc.layers.push_back(L::reflect_pad(1));
    enc.layers.push_back(conv(3, 1, 1));
    enc.layers.push_back(L::relu());
    enc.taps.push_back(2);
    enc.layers.push_back(L::reflect_pad(1));
    enc.layers.push_back(conv(4, 3, 2));
    enc.layers.push_back(L::relu());
    enc.taps.push_back(5);
    return enc;
}

style::DecoderT<double> tiny_decoder(Rng& rng) {
    using L = plotbot::nn::LayerSpecT<double>;
    style::DecoderT<double> dec;
    auto conv = [&](int oc, int ic) {
        L l = L::conv(oc, ic, 3, 3, 1, 0);
        const double lim = std::sqrt(6.0 / (ic * 9));
        for (auto& k : l.kernel) k = rng.uniform(-lim, lim);
        return l;
    };
    dec.layers.push_back(L::reflect_pad(1));
    dec.layers.push_back(conv(3, 4));
    dec.layers.push_back(L::relu());
    dec.layers.push_back(L::upsample2x());
    dec.layers.push_back(L::reflect_pad(1));
    dec.layers.push_back(conv(1, 3));
    return dec;
}

}  // namespace

TEST_CASE("encode: zero input through zero-bias encoder gives zero features") {
    Rng rng(1);
    plotbot::style::Encoder enc = style::make_default_encoder(1, rng);
    Tf zero(1, 1, 16, 16);
    auto r = style::encode(zero, enc);
    for (float v : r.features.data) CHECK(v == 0.0f);
}

TEST_CASE("encode: tap shapes halve at each downsampling stage") {
    Rng rng(2);
    plotbot::style::Encoder enc = style::make_default_encoder(1, rng);
    Tf x = random_tensor_f(1, 1, 32, 32, rng);
    auto r = style::encode(x, enc);
    REQUIRE(r.taps.size() == 4);
    CHECK(r.taps[0].h == 32);
    CHECK(r.taps[1].h == 16);
    CHECK(r.taps[2].h == 8);
    CHECK(r.taps[3].h == 4);
    CHECK(r.taps[0].c == 16);
    CHECK(r.taps[3].c == 128);
    // final tap is the encoder output
    CHECK(r.taps[3].data == r.features.data);
}

TEST_CASE("encode is deterministic for fixed seed") {
    auto run = [] {
        Rng rng(42);
        plotbot::style::Encoder enc = style::make_default_encoder(1, rng);
        Rng drng(7);
        Tf x = random_tensor_f(1, 1, 16, 16, drng);
        return style::encode(x, enc).features.data;
    };
    CHECK(run() == run());
}

TEST_CASE("adain: fixed point and moment transfer") {
    Rng rng(3);
    T c = random_tensor(2, 4, 8, 8, rng);
    SUBCASE("adain(x, x) = x within 1e-4 on non-constant channels") {
        const T t = style::adain(c, c);
        for (size_t i = 0; i < t.size(); ++i)
            CHECK(t.data[i] == doctest::Approx(c.data[i]).epsilon(1e-4));
    }
    SUBCASE("post-adain moments equal style moments within 1e-5") {
        const T s = random_tensor(1, 4, 6, 6, rng, 0.0, 3.0);
        const T t = style::adain(c, s);
        const auto mt = plotbot::nn::channel_moments(t);
        const auto ms = plotbot::nn::channel_moments(s);
        for (int n = 0; n < 2; ++n)
            for (int ic = 0; ic < 4; ++ic) {
                CHECK(mt.mu.at(n, ic, 0, 0) ==
                      doctest::Approx(ms.mu.at(0, ic, 0, 0)).epsilon(1e-5));
                CHECK(mt.sigma.at(n, ic, 0, 0) ==
                      doctest::Approx(ms.sigma.at(0, ic, 0, 0)).epsilon(1e-5));
            }
    }
    SUBCASE("constant style collapses output spread onto the style mean") {
        T cc(1, 1, 1, 2);
        cc.data = {0, 2};
        T ss(1, 1, 1, 2, 3.0);
        const T t = style::adain(cc, ss);
        // style sigma ~ sqrt(eps) so values land within a whisker of mean 3
        CHECK(t.data[0] == doctest::Approx(3.0).epsilon(1e-2));
        CHECK(t.data[1] == doctest::Approx(3.0).epsilon(1e-2));
        CHECK(std::abs(t.data[1] - t.data[0]) < 1e-2);
    }
    SUBCASE("channel mismatch throws") {
        T s2 = random_tensor(1, 3, 4, 4, rng);
        CHECK_THROWS_AS(style::adain(c, s2), plotbot::ShapeError);
    }
}

TEST_CASE("decode: zero-weight decoder is constant 0.5, shapes 8x") {
    Rng rng(4);
    plotbot::style::Decoder dec = style::make_default_decoder(rng);
    for (auto& l : dec.layers) {
        std::fill(l.kernel.begin(), l.kernel.end(), 0.0f);
        std::fill(l.bias.begin(), l.bias.end(), 0.0f);
    }
    Tf t = random_tensor_f(1, 128, 2, 2, rng);
    const Tf out = style::decode(t, dec);
    CHECK(out.c == 1);
    CHECK(out.h == 16);  // three 2x upsamples
    CHECK(out.w == 16);
    for (float v : out.data) CHECK(v == doctest::Approx(0.5f));
}

TEST_CASE("content_loss closed forms and FD") {
    Rng rng(5);
    T a = random_tensor(1, 2, 3, 3, rng);
    CHECK(style::content_loss(a, a) == 0.0);
    T b = a;
    for (auto& v : b.data) v += 1.0;
    CHECK(style::content_loss(b, a) == doctest::Approx(1.0));

    T target = random_tensor(1, 2, 3, 3, rng);
    T grad;
    (void)style::content_loss(a, target, &grad);
    const double h = 1e-3;
    for (size_t i = 0; i < a.size(); i += 2) {
        T ap = a, am = a;
        ap.data[i] += h;
        am.data[i] -= h;
        const double num =
            (style::content_loss(ap, target) - style::content_loss(am, target)) /
            (2 * h);
        CHECK(grad.data[i] == doctest::Approx(num).epsilon(1e-4));
    }
}

TEST_CASE("style_loss: fixed point, closed form, permutation invariance") {
    Rng rng(6);
    std::vector<T> taps{random_tensor(1, 3, 4, 4, rng)};
    CHECK(style::style_loss(taps, taps) == doctest::Approx(0.0));

    // single tap, means differ by 1 in every channel, sigmas equal:
    // mean over (n, c) of 1 -> loss 1
    T o(1, 3, 2, 2);
    T s(1, 3, 2, 2);
    for (int c = 0; c < 3; ++c)
        for (int p = 0; p < 4; ++p) {
            const double base = (p % 2) ? 1.0 : -1.0;
            o.at(0, c, p / 2, p % 2) = base + 1.0;
            s.at(0, c, p / 2, p % 2) = base;
        }
    CHECK(style::style_loss(std::vector<T>{o}, std::vector<T>{s}) == doctest::Approx(1.0));

    // spatial permutation within channels leaves the loss unchanged
    T op = o;
    std::swap(op.data[0], op.data[3]);
    CHECK(style::style_loss(std::vector<T>{op}, std::vector<T>{s}) ==
          doctest::Approx(style::style_loss(std::vector<T>{o}, std::vector<T>{s})));

    CHECK_THROWS_AS(style::style_loss(std::vector<T>{o}, std::vector<T>{}), plotbot::ShapeError);
}

TEST_CASE("style_loss gradient matches finite differences") {
    Rng rng(7);
    T o = random_tensor(1, 2, 4, 4, rng);
    T s = random_tensor(1, 2, 3, 3, rng);
    std::vector<T> grads;
    (void)style::style_loss(std::vector<T>{o}, std::vector<T>{s}, &grads);
    const double h = 1e-3;
    for (size_t i = 0; i < o.size(); i += 3) {
        T op = o, om = o;
        op.data[i] += h;
        om.data[i] -= h;
        const double num =
            (style::style_loss(std::vector<T>{op}, std::vector<T>{s}) - style::style_loss(std::vector<T>{om}, std::vector<T>{s})) /
            (2 * h);
        CHECK(grads[0].data[i] == doctest::Approx(num).epsilon(1e-4));
    }
}

TEST_CASE("sparsity_loss: closed forms and monotonicity") {
    T white(1, 1, 2, 2, 1.0);
    T mask(1, 1, 2, 2, 1.0);
    CHECK(style::sparsity_loss(white, mask) == 0.0);
    T black(1, 1, 2, 2, 0.0);
    CHECK(style::sparsity_loss(black, mask) == doctest::Approx(4.0));

    // darkening a masked pixel raises the loss; unmasked pixel does nothing
    T out(1, 1, 2, 2, 1.0);
    T m(1, 1, 2, 2, 0.0);
    m.data[0] = 1.0;
    const double before = style::sparsity_loss(out, m);
    out.data[0] = 0.5;
    CHECK(style::sparsity_loss(out, m) > before);
    out.data[1] = 0.1;  // mask 0 there
    CHECK(style::sparsity_loss(out, m) == doctest::Approx(before + 0.5));

    T grad;
    (void)style::sparsity_loss(out, m, &grad);
    CHECK(grad.data[0] == -1.0);
    CHECK(grad.data[1] == 0.0);
}

TEST_CASE("total_loss weighting and toggles") {
    style::LossBreakdown b;
    b.content = 2, b.style = 3, b.consist = 5, b.sparse = 7;
    style::LossWeights w;  // paper weighting 1/1/1/10
    CHECK(style::total_loss(b, w) == doctest::Approx(2 + 3 + 5 + 70));
    w.use_content = w.use_style = w.use_consist = w.use_sparse = false;
    CHECK(style::total_loss(b, w) == 0.0);
}

TEST_CASE("self_consistency_loss positive for a random decoder") {
    Rng rng(8);
    auto enc = tiny_encoder(rng);
    auto dec = tiny_decoder(rng);
    T s = random_tensor(1, 1, 8, 8, rng, 0.0, 1.0);
    CHECK(style::self_consistency_loss(s, enc, dec) > 0.0);
}

TEST_CASE("full objective decoder gradients match finite differences") {
    Rng rng(9);
    auto enc = tiny_encoder(rng);
    auto dec = tiny_decoder(rng);
    T content = random_tensor(1, 1, 8, 8, rng, 0.0, 1.0);
    T style_img = random_tensor(1, 1, 8, 8, rng, 0.0, 1.0);
    // mask must match the decoder output dims (input 4x4 -> 8x8)
    T mask(1, 1, 8, 8);
    for (size_t i = 0; i < mask.size(); ++i) mask.data[i] = i % 3 ? 1.0 : 0.0;
    style::LossWeights w;
    w.lambda4 = 2.0f;

    const size_t np = style::stack_param_count(dec.layers);
    std::vector<double> grads(np, 0.0);
    (void)style::compute_batch_grads(enc, dec, content, mask, style_img, w,
                                     &grads);

    auto objective = [&](const std::vector<double>& flat) {
        auto d2 = dec;
        style::stack_unflatten(d2.layers, flat);
        style::LossBreakdown b = style::compute_batch_grads(
            enc, d2, content, mask, style_img, w, static_cast<std::vector<double>*>(nullptr));
        return b.total;
    };
    std::vector<double> flat = style::stack_flatten(dec.layers);
    const double h = 1e-4;
    int checked = 0;
    for (size_t i = 0; i < np && checked < 40; i += np / 37 + 1, ++checked) {
        auto fp = flat, fm = flat;
        fp[i] += h;
        fm[i] -= h;
        const double num = (objective(fp) - objective(fm)) / (2 * h);
        const double denom =
            std::max({std::abs(num), std::abs(grads[i]), 1e-6});
        CHECK(std::abs(grads[i] - num) / denom < 1e-4);
    }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    Rng rng(10);
    style::Checkpoint ck;
    ck.encoder = style::make_default_encoder(1, rng);
    ck.decoder = style::make_default_decoder(rng);
    ck.seed = 12345;
    ck.iteration = 678;
    ck.lambdas[0] = 1;
    ck.lambdas[3] = 10;

    const std::string path = "/tmp/plotbot_ckpt_test.bin";
    style::save_checkpoint(path, ck);
    const style::Checkpoint back = style::load_checkpoint(path);
    CHECK(back.seed == ck.seed);
    CHECK(back.iteration == ck.iteration);
    CHECK(back.lambdas[3] == ck.lambdas[3]);
    REQUIRE(back.encoder.layers.size() == ck.encoder.layers.size());
    CHECK(back.encoder.taps == ck.encoder.taps);
    CHECK(style::stack_flatten(back.encoder.layers) ==
          style::stack_flatten(ck.encoder.layers));
    CHECK(style::stack_flatten(back.decoder.layers) ==
          style::stack_flatten(ck.decoder.layers));

    // save -> load -> save reproduces identical bytes
    const std::string path2 = "/tmp/plotbot_ckpt_test2.bin";
    style::save_checkpoint(path2, back);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), {});
    std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("load_checkpoint rejects garbage") {
    const std::string path = "/tmp/plotbot_ckpt_bad.bin";
    std::ofstream(path, std::ios::binary) << "NOTMAGIC garbage";
    CHECK_THROWS_AS(style::load_checkpoint(path), plotbot::DataError);
    std::remove(path.c_str());
}

TEST_CASE("train: deterministic, loss log schema, smoothed descent") {
    style::TrainData data;
    Rng rng(11);
    for (int i = 0; i < 4; ++i) {
        data.contents.push_back(random_tensor_f(1, 1, 16, 16, rng, 0.2, 1.0));
        Tf mask(1, 1, 16, 16, 1.0f);
        for (int p = 0; p < 64; ++p) mask.data[p] = 0.0f;
        data.masks.push_back(mask);
    }
    data.styles.push_back(random_tensor_f(1, 1, 16, 16, rng, 0.0, 1.0));

    style::TrainConfig cfg;
    cfg.iterations = 60;
    cfg.batch = 2;
    cfg.seed = 99;

    std::ostringstream log1, log2;
    const style::Checkpoint c1 = style::train(cfg, data, &log1);
    const style::Checkpoint c2 = style::train(cfg, data, &log2);
    CHECK(log1.str() == log2.str());
    CHECK(style::stack_flatten(c1.decoder.layers) ==
          style::stack_flatten(c2.decoder.layers));

    std::istringstream rows(log1.str());
    std::string line;
    int count = 0;
    while (std::getline(rows, line)) {
        int commas = 0;
        for (char ch : line) commas += ch == ',';
        CHECK(commas == 5);  // iter + 4 terms + total
        ++count;
    }
    CHECK(count == 61);  // header + one row per iteration
}

TEST_CASE("train rejects an empty dataset") {
    style::TrainData empty;
    style::TrainConfig cfg;
    CHECK_THROWS_AS(style::train(cfg, empty, nullptr), plotbot::ConfigError);
}

TEST_CASE("synthesize: shape contract, determinism, style sensitivity") {
    Rng rng(12);
    style::Checkpoint ck;
    ck.encoder = style::make_default_encoder(1, rng);
    ck.decoder = style::make_default_decoder(rng);

    Tf photo = random_tensor_f(1, 1, 20, 20, rng);  // not a multiple of 8
    Tf s1 = random_tensor_f(1, 1, 16, 16, rng);
    Tf s2 = random_tensor_f(1, 1, 16, 16, rng);

    const Tf o1 = style::synthesize(photo, s1, ck);
    CHECK(o1.h == 20);
    CHECK(o1.w == 20);
    for (float v : o1.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(style::synthesize(photo, s1, ck).data == o1.data);

    const Tf o2 = style::synthesize(photo, s2, ck);
    double dist = 0;
    for (size_t i = 0; i < o1.size(); ++i) {
        const double d = o1.data[i] - o2.data[i];
        dist += d * d;
    }
    CHECK(dist > 0.0);
}
