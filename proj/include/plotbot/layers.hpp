#pragma once

#include <algorithm>
#include <cmath>
#include <tuple>

#include "plotbot/tensor.hpp"

// Forward and hand-derived backward passes for the fixed layer set the
// synthesis network needs: conv2d, relu, nearest 2x upsample, reflection
// padding, per-channel moments, and the Adam update. All functions are pure:
// inputs are never mutated and results are deterministic.

namespace plotbot::nn {

enum class LayerKind { Conv2d, Relu, Upsample2x, ReflectPad };

template <class S>
struct LayerSpecT {
    LayerKind kind = LayerKind::Relu;
    // conv2d only
    int out_c = 0, in_c = 0, kh = 0, kw = 0;
    int stride = 1;
    int pad = 0;  // zero padding for conv2d; width for ReflectPad
    std::vector<S> kernel;  // out_c*in_c*kh*kw
    std::vector<S> bias;    // out_c

    static LayerSpecT conv(int out_c, int in_c, int kh, int kw, int stride = 1,
                           int pad = 0) {
        LayerSpecT s;
        s.kind = LayerKind::Conv2d;
        s.out_c = out_c;
        s.in_c = in_c;
        s.kh = kh;
        s.kw = kw;
        s.stride = stride;
        s.pad = pad;
        s.kernel.assign(static_cast<size_t>(out_c) * in_c * kh * kw, S(0));
        s.bias.assign(out_c, S(0));
        return s;
    }
    static LayerSpecT relu() { return LayerSpecT{}; }
    static LayerSpecT upsample2x() {
        LayerSpecT s;
        s.kind = LayerKind::Upsample2x;
        return s;
    }
    static LayerSpecT reflect_pad(int width) {
        LayerSpecT s;
        s.kind = LayerKind::ReflectPad;
        s.pad = width;
        return s;
    }

    size_t param_count() const {
        return kind == LayerKind::Conv2d ? kernel.size() + bias.size() : 0;
    }
};

using LayerSpec = LayerSpecT<float>;

// Variance epsilon used inside sigma = sqrt(var + kMomentEps), both in the
// moments op and in AdaIN, so constant channels never divide by zero.
inline constexpr double kMomentEps = 1e-5;

// ---------------------------------------------------------------------------
// conv2d

template <class S>
TensorT<S> conv2d(const TensorT<S>& x, const LayerSpecT<S>& spec) {
    if (spec.kind != LayerKind::Conv2d)
        throw UsageError("conv2d: spec kind is not conv2d");
    if (x.c != spec.in_c)
        throw ShapeError("conv2d: input " + x.dims_str() + " vs kernel in_c " +
                         std::to_string(spec.in_c));
    const int oh = (x.h + 2 * spec.pad - spec.kh) / spec.stride + 1;
    const int ow = (x.w + 2 * spec.pad - spec.kw) / spec.stride + 1;
    if (oh <= 0 || ow <= 0)
        throw ShapeError("conv2d: kernel " + std::to_string(spec.kh) + "x" +
                         std::to_string(spec.kw) + " larger than padded input " +
                         x.dims_str());
    TensorT<S> y(x.n, spec.out_c, oh, ow);
    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < spec.out_c; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    S acc = spec.bias[oc];
                    for (int ic = 0; ic < spec.in_c; ++ic)
                        for (int ky = 0; ky < spec.kh; ++ky) {
                            const int iy = oy * spec.stride + ky - spec.pad;
                            if (iy < 0 || iy >= x.h) continue;
                            for (int kx = 0; kx < spec.kw; ++kx) {
                                const int ix = ox * spec.stride + kx - spec.pad;
                                if (ix < 0 || ix >= x.w) continue;
                                const S k = spec.kernel[((static_cast<size_t>(oc) * spec.in_c + ic) * spec.kh + ky) * spec.kw + kx];
                                acc += k * x.at(in, ic, iy, ix);
                            }
                        }
                    y.at(in, oc, oy, ox) = acc;
                }
    return y;
}

template <class S>
struct ConvGrads {
    TensorT<S> input;
    std::vector<S> kernel;
    std::vector<S> bias;
};

template <class S>
ConvGrads<S> conv2d_backward(const TensorT<S>& gy, const TensorT<S>& x,
                             const LayerSpecT<S>& spec) {
    if (x.size() == 0) throw UsageError("conv2d_backward: missing cached input");
    const int oh = (x.h + 2 * spec.pad - spec.kh) / spec.stride + 1;
    const int ow = (x.w + 2 * spec.pad - spec.kw) / spec.stride + 1;
    if (gy.n != x.n || gy.c != spec.out_c || gy.h != oh || gy.w != ow)
        throw ShapeError("conv2d_backward: grad_out " + gy.dims_str() +
                         " does not match forward output dims");
    ConvGrads<S> g;
    g.input = TensorT<S>(x.n, x.c, x.h, x.w);
    g.kernel.assign(spec.kernel.size(), S(0));
    g.bias.assign(spec.bias.size(), S(0));
    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < spec.out_c; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const S go = gy.at(in, oc, oy, ox);
                    if (go == S(0)) continue;
                    g.bias[oc] += go;
                    for (int ic = 0; ic < spec.in_c; ++ic)
                        for (int ky = 0; ky < spec.kh; ++ky) {
                            const int iy = oy * spec.stride + ky - spec.pad;
                            if (iy < 0 || iy >= x.h) continue;
                            for (int kx = 0; kx < spec.kw; ++kx) {
                                const int ix = ox * spec.stride + kx - spec.pad;
                                if (ix < 0 || ix >= x.w) continue;
                                const size_t ki = ((static_cast<size_t>(oc) * spec.in_c + ic) * spec.kh + ky) * spec.kw + kx;
                                g.kernel[ki] += go * x.at(in, ic, iy, ix);
                                g.input.at(in, ic, iy, ix) += go * spec.kernel[ki];
                            }
                        }
                }
    return g;
}

// ---------------------------------------------------------------------------
// relu

template <class S>
TensorT<S> relu(const TensorT<S>& x) {
    TensorT<S> y = x;
    y.grad.clear();
    for (S& v : y.data) v = std::max(v, S(0));
    return y;
}

template <class S>
TensorT<S> relu_backward(const TensorT<S>& gy, const TensorT<S>& x) {
    require_same_dims(gy, x, "relu_backward");
    TensorT<S> gx(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.data.size(); ++i)
        gx.data[i] = x.data[i] > S(0) ? gy.data[i] : S(0);
    return gx;
}

// ---------------------------------------------------------------------------
// nearest 2x upsample

template <class S>
TensorT<S> nearest_upsample2x(const TensorT<S>& x) {
    TensorT<S> y(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    const S v = x.at(in, ic, iy, ix);
                    y.at(in, ic, 2 * iy, 2 * ix) = v;
                    y.at(in, ic, 2 * iy, 2 * ix + 1) = v;
                    y.at(in, ic, 2 * iy + 1, 2 * ix) = v;
                    y.at(in, ic, 2 * iy + 1, 2 * ix + 1) = v;
                }
    return y;
}

template <class S>
TensorT<S> nearest_upsample2x_backward(const TensorT<S>& gy, const TensorT<S>& x) {
    if (gy.n != x.n || gy.c != x.c || gy.h != 2 * x.h || gy.w != 2 * x.w)
        throw ShapeError("upsample2x_backward: grad_out " + gy.dims_str() +
                         " vs input " + x.dims_str());
    TensorT<S> gx(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix)
                    gx.at(in, ic, iy, ix) =
                        gy.at(in, ic, 2 * iy, 2 * ix) +
                        gy.at(in, ic, 2 * iy, 2 * ix + 1) +
                        gy.at(in, ic, 2 * iy + 1, 2 * ix) +
                        gy.at(in, ic, 2 * iy + 1, 2 * ix + 1);
    return gx;
}

// ---------------------------------------------------------------------------
// reflection padding (edge pixel not repeated: [1,2,3] w=1 -> [2,1,2,3,2])

inline int reflect_index(int i, int size) {
    if (i < 0) return -i;
    if (i >= size) return 2 * size - 2 - i;
    return i;
}

template <class S>
TensorT<S> reflection_pad(const TensorT<S>& x, int width) {
    if (width < 0 || (width > 0 && width >= std::min(x.h, x.w)))
        throw UsageError("reflection_pad: width " + std::to_string(width) +
                         " too large for input " + x.dims_str());
    TensorT<S> y(x.n, x.c, x.h + 2 * width, x.w + 2 * width);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int oy = 0; oy < y.h; ++oy) {
                const int iy = reflect_index(oy - width, x.h);
                for (int ox = 0; ox < y.w; ++ox)
                    y.at(in, ic, oy, ox) =
                        x.at(in, ic, iy, reflect_index(ox - width, x.w));
            }
    return y;
}

template <class S>
TensorT<S> reflection_pad_backward(const TensorT<S>& gy, const TensorT<S>& x,
                                   int width) {
    if (gy.h != x.h + 2 * width || gy.w != x.w + 2 * width || gy.n != x.n ||
        gy.c != x.c)
        throw ShapeError("reflection_pad_backward: grad_out " + gy.dims_str() +
                         " vs input " + x.dims_str());
    TensorT<S> gx(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int oy = 0; oy < gy.h; ++oy) {
                const int iy = reflect_index(oy - width, x.h);
                for (int ox = 0; ox < gy.w; ++ox)
                    gx.at(in, ic, iy, reflect_index(ox - width, x.w)) +=
                        gy.at(in, ic, oy, ox);
            }
    return gx;
}

// ---------------------------------------------------------------------------
// per sample-channel moments: mu and sigma = sqrt(var + kMomentEps)

template <class S>
struct Moments {
    TensorT<S> mu;     // n x c x 1 x 1
    TensorT<S> sigma;  // n x c x 1 x 1
};

template <class S>
Moments<S> channel_moments(const TensorT<S>& x) {
    if (x.h * x.w < 1) throw UsageError("channel_moments: empty spatial dims");
    Moments<S> m{TensorT<S>(x.n, x.c, 1, 1), TensorT<S>(x.n, x.c, 1, 1)};
    const double k = static_cast<double>(x.h) * x.w;
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            double sum = 0;
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) sum += x.at(in, ic, iy, ix);
            const double mu = sum / k;
            double var = 0;
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    const double d = x.at(in, ic, iy, ix) - mu;
                    var += d * d;
                }
            var /= k;
            m.mu.at(in, ic, 0, 0) = static_cast<S>(mu);
            m.sigma.at(in, ic, 0, 0) = static_cast<S>(std::sqrt(var + kMomentEps));
        }
    return m;
}

// gx_i = gmu/k + gsigma * (x_i - mu) / (k * sigma)
template <class S>
TensorT<S> channel_moments_backward(const TensorT<S>& gmu, const TensorT<S>& gsigma,
                                    const TensorT<S>& x) {
    if (gmu.n != x.n || gmu.c != x.c || gsigma.n != x.n || gsigma.c != x.c)
        throw ShapeError("channel_moments_backward: grad dims vs input " +
                         x.dims_str());
    const Moments<S> m = channel_moments(x);
    TensorT<S> gx(x.n, x.c, x.h, x.w);
    const S k = static_cast<S>(x.h) * static_cast<S>(x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const S gm = gmu.at(in, ic, 0, 0);
            const S gs = gsigma.at(in, ic, 0, 0);
            const S mu = m.mu.at(in, ic, 0, 0);
            const S sigma = m.sigma.at(in, ic, 0, 0);
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix)
                    gx.at(in, ic, iy, ix) =
                        gm / k + gs * (x.at(in, ic, iy, ix) - mu) / (k * sigma);
        }
    return gx;
}

// ---------------------------------------------------------------------------
// Adam

template <class S>
struct AdamStateT {
    std::vector<S> m, v;
    long step = 0;
    S lr = S(1e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S eps = S(1e-8);

    explicit AdamStateT(size_t param_count = 0, S lr_ = S(1e-4))
        : m(param_count, S(0)), v(param_count, S(0)), lr(lr_) {}
};

using AdamState = AdamStateT<float>;

template <class S>
void adam_update(std::vector<S>& params, const std::vector<S>& grads,
                 AdamStateT<S>& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_update: params " + std::to_string(params.size()) +
                         ", grads " + std::to_string(grads.size()) +
                         ", moments " + std::to_string(state.m.size()));
    state.step += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.step);
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.step);
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (S(1) - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (S(1) - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= static_cast<S>(state.lr * mhat /
                                    (std::sqrt(vhat) + state.eps));
    }
}

}  // namespace plotbot::nn
