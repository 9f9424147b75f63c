#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "plotbot/layers.hpp"
#include "plotbot/rng.hpp"
#include "plotbot/tensor.hpp"

// Global sketch synthesis: a frozen convolutional encoder, an AdaIN feature
// transfer, and a trainable decoder, optimized with four losses (content,
// style, self-consistency, compositional sparsity).
//
// Reductions: content / style / self-consistency losses are means over
// elements; the sparsity loss is a plain sum over pixels (averaged over the
// batch during training). Lambda weights in configs assume these reductions.

namespace plotbot::style {

using nn::LayerKind;
using nn::LayerSpecT;
using nn::TensorT;

template <class S>
using LayerStackT = std::vector<LayerSpecT<S>>;

// ---------------------------------------------------------------------------
// layer chains

template <class S>
size_t stack_param_count(const LayerStackT<S>& stack) {
    size_t n = 0;
    for (const auto& l : stack) n += l.param_count();
    return n;
}

template <class S>
std::vector<S> stack_flatten(const LayerStackT<S>& stack) {
    std::vector<S> out;
    out.reserve(stack_param_count(stack));
    for (const auto& l : stack)
        if (l.kind == LayerKind::Conv2d) {
            out.insert(out.end(), l.kernel.begin(), l.kernel.end());
            out.insert(out.end(), l.bias.begin(), l.bias.end());
        }
    return out;
}

template <class S>
void stack_unflatten(LayerStackT<S>& stack, const std::vector<S>& flat) {
    size_t off = 0;
    for (auto& l : stack)
        if (l.kind == LayerKind::Conv2d) {
            if (off + l.kernel.size() + l.bias.size() > flat.size())
                throw ShapeError("stack_unflatten: flat parameter vector too short");
            std::copy(flat.begin() + off, flat.begin() + off + l.kernel.size(),
                      l.kernel.begin());
            off += l.kernel.size();
            std::copy(flat.begin() + off, flat.begin() + off + l.bias.size(),
                      l.bias.begin());
            off += l.bias.size();
        }
    if (off != flat.size())
        throw ShapeError("stack_unflatten: flat parameter vector length mismatch");
}

template <class S>
TensorT<S> apply_layer(const LayerSpecT<S>& l, const TensorT<S>& x) {
    switch (l.kind) {
        case LayerKind::Conv2d: return nn::conv2d(x, l);
        case LayerKind::Relu: return nn::relu(x);
        case LayerKind::Upsample2x: return nn::nearest_upsample2x(x);
        case LayerKind::ReflectPad: return nn::reflection_pad(x, l.pad);
    }
    throw UsageError("apply_layer: unknown layer kind");
}

// acts (when non-null) receives layers.size()+1 activations, acts[0] = input.
template <class S>
TensorT<S> chain_forward(const LayerStackT<S>& layers, const TensorT<S>& x,
                         std::vector<TensorT<S>>* acts = nullptr) {
    if (acts) {
        acts->clear();
        acts->reserve(layers.size() + 1);
        acts->push_back(x);
        for (const auto& l : layers) acts->push_back(apply_layer(l, acts->back()));
        return acts->back();
    }
    TensorT<S> cur = x;
    for (const auto& l : layers) cur = apply_layer(l, cur);
    return cur;
}

// Backpropagates gy through the chain. param_grads, when non-null, must have
// stack_param_count entries and is accumulated into (callers zero it).
// extra_grads injects additional cotangents at intermediate activations:
// pairs of (layer index i, grad w.r.t. the output of layer i).
template <class S>
TensorT<S> chain_backward(
    const LayerStackT<S>& layers, const std::vector<TensorT<S>>& acts,
    TensorT<S> gy, std::vector<S>* param_grads = nullptr,
    const std::vector<std::pair<int, const TensorT<S>*>>* extra_grads = nullptr) {
    if (acts.size() != layers.size() + 1)
        throw UsageError("chain_backward: missing cached activations");
    // per-layer offsets into the flat parameter vector
    std::vector<size_t> offsets(layers.size(), 0);
    size_t off = 0;
    for (size_t i = 0; i < layers.size(); ++i) {
        offsets[i] = off;
        off += layers[i].param_count();
    }
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        if (extra_grads)
            for (const auto& [idx, g] : *extra_grads)
                if (idx == i) {
                    require_same_dims(gy, *g, "chain_backward extra grad");
                    for (size_t j = 0; j < gy.data.size(); ++j)
                        gy.data[j] += g->data[j];
                }
        const auto& l = layers[i];
        const TensorT<S>& xin = acts[i];
        switch (l.kind) {
            case LayerKind::Conv2d: {
                auto g = nn::conv2d_backward(gy, xin, l);
                if (param_grads) {
                    S* pk = param_grads->data() + offsets[i];
                    for (size_t j = 0; j < g.kernel.size(); ++j) pk[j] += g.kernel[j];
                    S* pb = pk + g.kernel.size();
                    for (size_t j = 0; j < g.bias.size(); ++j) pb[j] += g.bias[j];
                }
                gy = std::move(g.input);
                break;
            }
            case LayerKind::Relu:
                gy = nn::relu_backward(gy, xin);
                break;
            case LayerKind::Upsample2x:
                gy = nn::nearest_upsample2x_backward(gy, xin);
                break;
            case LayerKind::ReflectPad:
                gy = nn::reflection_pad_backward(gy, xin, l.pad);
                break;
        }
    }
    return gy;
}

// ---------------------------------------------------------------------------
// encoder / decoder

template <class S>
struct EncoderT {
    LayerStackT<S> layers;
    std::vector<int> taps;  // layer indices; last tap is the encoder output
};

template <class S>
struct DecoderT {
    LayerStackT<S> layers;  // followed by a sigmoid into [0,1] in decode()
};

using Encoder = EncoderT<float>;
using Decoder = DecoderT<float>;

inline void init_conv(nn::LayerSpec& l, Rng& rng) {
    const double limit = std::sqrt(6.0 / (l.in_c * l.kh * l.kw));
    for (auto& k : l.kernel) k = static_cast<float>(rng.uniform(-limit, limit));
    // biases stay zero
}

// Four stages of conv3x3 + relu with channel widths 16/32/64/128 and stride-2
// downsampling between stages; one tap after each stage's relu.
inline Encoder make_default_encoder(int in_channels, Rng& rng) {
    using L = nn::LayerSpec;
    Encoder enc;
    const int widths[4] = {16, 32, 64, 128};
    int prev = in_channels;
    for (int s = 0; s < 4; ++s) {
        enc.layers.push_back(L::reflect_pad(1));
        L conv = L::conv(widths[s], prev, 3, 3, s == 0 ? 1 : 2, 0);
        init_conv(conv, rng);
        enc.layers.push_back(conv);
        enc.layers.push_back(L::relu());
        enc.taps.push_back(static_cast<int>(enc.layers.size()) - 1);
        prev = widths[s];
    }
    return enc;
}

// Nine conv layers and three nearest up-sampling layers, reflection padding
// on every conv, 128 channels in, 1 grayscale channel out.
inline Decoder make_default_decoder(Rng& rng) {
    using L = nn::LayerSpec;
    Decoder dec;
    struct Step { int out, in; bool up_before, relu_after; };
    const Step steps[9] = {
        {64, 128, false, true},
        {64, 64, true, true},
        {32, 64, false, true},
        {32, 32, true, true},
        {16, 32, false, true},
        {16, 16, true, true},
        {16, 16, false, true},
        {8, 16, false, true},
        {1, 8, false, false},
    };
    for (const auto& st : steps) {
        if (st.up_before) dec.layers.push_back(L::upsample2x());
        dec.layers.push_back(L::reflect_pad(1));
        L conv = L::conv(st.out, st.in, 3, 3, 1, 0);
        init_conv(conv, rng);
        dec.layers.push_back(conv);
        if (st.relu_after) dec.layers.push_back(L::relu());
    }
    return dec;
}

template <class S>
struct EncodeResultT {
    TensorT<S> features;
    std::vector<TensorT<S>> taps;
    std::vector<TensorT<S>> acts;  // populated only when requested
};

template <class S>
EncodeResultT<S> encode(const TensorT<S>& photo, const EncoderT<S>& enc,
                        bool keep_cache = false) {
    EncodeResultT<S> r;
    std::vector<TensorT<S>> acts;
    r.features = chain_forward(enc.layers, photo, &acts);
    for (int t : enc.taps) r.taps.push_back(acts[static_cast<size_t>(t) + 1]);
    if (keep_cache) r.acts = std::move(acts);
    return r;
}

// Grad w.r.t. the encoder input given cotangents on the final features and on
// each tap. The encoder is frozen, so no parameter grads are produced.
template <class S>
TensorT<S> encode_backward(const EncoderT<S>& enc,
                           const std::vector<TensorT<S>>& acts,
                           const TensorT<S>& g_features,
                           const std::vector<TensorT<S>>& tap_grads) {
    std::vector<std::pair<int, const TensorT<S>*>> extra;
    for (size_t i = 0; i < tap_grads.size(); ++i) {
        if (tap_grads[i].size() == 0) continue;
        // the last tap is the final output; its grad rides on g_features
        if (enc.taps[i] == static_cast<int>(enc.layers.size()) - 1) continue;
        extra.emplace_back(enc.taps[i], &tap_grads[i]);
    }
    TensorT<S> gy = g_features;
    if (!tap_grads.empty() && tap_grads.back().size() != 0 &&
        enc.taps.back() == static_cast<int>(enc.layers.size()) - 1) {
        for (size_t j = 0; j < gy.data.size(); ++j)
            gy.data[j] += tap_grads.back().data[j];
    }
    return chain_backward(enc.layers, acts, std::move(gy),
                          static_cast<std::vector<S>*>(nullptr), &extra);
}

template <class S>
TensorT<S> sigmoid(const TensorT<S>& x) {
    TensorT<S> y = x;
    for (S& v : y.data)
        v = static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    return y;
}

template <class S>
TensorT<S> sigmoid_backward(const TensorT<S>& gy, const TensorT<S>& y) {
    TensorT<S> gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] *= y.data[i] * (S(1) - y.data[i]);
    return gx;
}

template <class S>
struct DecodeCacheT {
    std::vector<TensorT<S>> acts;
    TensorT<S> out;  // post-sigmoid
};

template <class S>
TensorT<S> decode(const TensorT<S>& t, const DecoderT<S>& dec,
                  DecodeCacheT<S>* cache = nullptr) {
    if (!dec.layers.empty() && dec.layers.front().kind == LayerKind::ReflectPad) {
        const auto& firstconv = dec.layers[1];
        if (firstconv.kind == LayerKind::Conv2d && t.c != firstconv.in_c)
            throw ShapeError("decode: input channels " + std::to_string(t.c) +
                             " vs decoder in_c " + std::to_string(firstconv.in_c));
    }
    std::vector<TensorT<S>> acts;
    TensorT<S> raw = chain_forward(dec.layers, t, cache ? &acts : nullptr);
    TensorT<S> out = sigmoid(raw);
    if (cache) {
        cache->acts = std::move(acts);
        cache->out = out;
    }
    return out;
}

// g_out -> decoder parameter grads (accumulated) and grad w.r.t. t.
template <class S>
TensorT<S> decode_backward(const DecoderT<S>& dec, const DecodeCacheT<S>& cache,
                           const TensorT<S>& g_out, std::vector<S>* param_grads) {
    TensorT<S> g_raw = sigmoid_backward(g_out, cache.out);
    return chain_backward(dec.layers, cache.acts, std::move(g_raw), param_grads);
}

// ---------------------------------------------------------------------------
// AdaIN: re-normalize content features to carry the style features' moments.
// style may have batch 1 (broadcast over the content batch).

template <class S>
TensorT<S> adain(const TensorT<S>& content, const TensorT<S>& st) {
    if (content.c != st.c)
        throw ShapeError("adain: channel mismatch " + content.dims_str() + " vs " +
                         st.dims_str());
    if (st.n != content.n && st.n != 1)
        throw ShapeError("adain: style batch " + std::to_string(st.n) +
                         " incompatible with content batch " +
                         std::to_string(content.n));
    const auto mc = nn::channel_moments(content);
    const auto ms = nn::channel_moments(st);
    TensorT<S> t(content.n, content.c, content.h, content.w);
    for (int in = 0; in < content.n; ++in) {
        const int sn = st.n == 1 ? 0 : in;
        for (int ic = 0; ic < content.c; ++ic) {
            const S mu_c = mc.mu.at(in, ic, 0, 0);
            const S sg_c = mc.sigma.at(in, ic, 0, 0);
            const S mu_s = ms.mu.at(sn, ic, 0, 0);
            const S sg_s = ms.sigma.at(sn, ic, 0, 0);
            for (int iy = 0; iy < content.h; ++iy)
                for (int ix = 0; ix < content.w; ++ix)
                    t.at(in, ic, iy, ix) =
                        sg_s * (content.at(in, ic, iy, ix) - mu_c) / sg_c + mu_s;
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// losses

// mean squared distance; grad (w.r.t. the first argument) optional
template <class S>
double content_loss(const TensorT<S>& out_feat, const TensorT<S>& target,
                    TensorT<S>* grad = nullptr) {
    require_same_dims(out_feat, target, "content_loss");
    const double k = static_cast<double>(out_feat.size());
    double acc = 0;
    for (size_t i = 0; i < out_feat.data.size(); ++i) {
        const double d = out_feat.data[i] - target.data[i];
        acc += d * d;
    }
    if (grad) {
        *grad = TensorT<S>(out_feat.n, out_feat.c, out_feat.h, out_feat.w);
        for (size_t i = 0; i < out_feat.data.size(); ++i)
            grad->data[i] =
                static_cast<S>(2.0 * (out_feat.data[i] - target.data[i]) / k);
    }
    return acc / k;
}

// Per tap: mean over (n,c) of squared mu differences plus squared sigma
// differences; summed over taps. Style taps may be batch-1 (broadcast).
template <class S>
double style_loss(const std::vector<TensorT<S>>& out_taps,
                  const std::vector<TensorT<S>>& style_taps,
                  std::vector<TensorT<S>>* tap_grads = nullptr) {
    if (out_taps.size() != style_taps.size())
        throw ShapeError("style_loss: tap count mismatch");
    if (tap_grads) tap_grads->assign(out_taps.size(), TensorT<S>());
    double total = 0;
    for (size_t ti = 0; ti < out_taps.size(); ++ti) {
        const auto& o = out_taps[ti];
        const auto& s = style_taps[ti];
        if (o.c != s.c || (s.n != o.n && s.n != 1))
            throw ShapeError("style_loss: tap " + std::to_string(ti) + " dims " +
                             o.dims_str() + " vs " + s.dims_str());
        const auto mo = nn::channel_moments(o);
        const auto ms = nn::channel_moments(s);
        const double k = static_cast<double>(o.n) * o.c;
        TensorT<S> gmu(o.n, o.c, 1, 1), gsigma(o.n, o.c, 1, 1);
        for (int in = 0; in < o.n; ++in) {
            const int sn = s.n == 1 ? 0 : in;
            for (int ic = 0; ic < o.c; ++ic) {
                const double dm = mo.mu.at(in, ic, 0, 0) - ms.mu.at(sn, ic, 0, 0);
                const double ds =
                    mo.sigma.at(in, ic, 0, 0) - ms.sigma.at(sn, ic, 0, 0);
                total += (dm * dm + ds * ds) / k;
                gmu.at(in, ic, 0, 0) = static_cast<S>(2.0 * dm / k);
                gsigma.at(in, ic, 0, 0) = static_cast<S>(2.0 * ds / k);
            }
        }
        if (tap_grads)
            (*tap_grads)[ti] = nn::channel_moments_backward(gmu, gsigma, o);
    }
    return total;
}

// sum over elements of mask * (1 - out); mask is binary, 1 where ink is
// discouraged. grad w.r.t. out is -mask.
template <class S>
double sparsity_loss(const TensorT<S>& out, const TensorT<S>& mask,
                     TensorT<S>* grad = nullptr) {
    require_same_dims(out, mask, "sparsity_loss");
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i)
        acc += mask.data[i] * (S(1) - out.data[i]);
    if (grad) {
        *grad = TensorT<S>(out.n, out.c, out.h, out.w);
        for (size_t i = 0; i < out.data.size(); ++i)
            grad->data[i] = -mask.data[i];
    }
    return acc;
}

// Reconstruction error of the full pipeline with content = style = s.
template <class S>
double self_consistency_loss(const TensorT<S>& s, const EncoderT<S>& enc,
                             const DecoderT<S>& dec) {
    auto es = encode(s, enc);
    TensorT<S> t = adain(es.features, es.features);
    TensorT<S> out = decode(t, dec);
    return content_loss(out, s);
}

struct LossBreakdown {
    double content = 0, style = 0, consist = 0, sparse = 0, total = 0;
};

struct LossWeights {
    float lambda1 = 1, lambda2 = 1, lambda3 = 1, lambda4 = 10;
    bool use_content = true, use_style = true, use_consist = true,
         use_sparse = true;
};

inline double total_loss(LossBreakdown& b, const LossWeights& w) {
    b.total = (w.use_content ? w.lambda1 * b.content : 0.0) +
              (w.use_style ? w.lambda2 * b.style : 0.0) +
              (w.use_consist ? w.lambda3 * b.consist : 0.0) +
              (w.use_sparse ? w.lambda4 * b.sparse : 0.0);
    return b.total;
}

// ---------------------------------------------------------------------------
// full objective with decoder gradients
//
// content: (n,1,h,w) photos, masks: matching binary sparsity masks,
// style_img: (1,1,hs,ws) real sketch. decoder_grads must be pre-sized to the
// decoder parameter count; gradients are accumulated into it.

template <class S>
LossBreakdown compute_batch_grads(const EncoderT<S>& enc, const DecoderT<S>& dec,
                                  const TensorT<S>& content,
                                  const TensorT<S>& masks,
                                  const TensorT<S>& style_img,
                                  const LossWeights& w,
                                  std::vector<S>* decoder_grads) {
    LossBreakdown b;
    const double inv_batch = 1.0 / content.n;

    auto ec = encode(content, enc);
    auto es = encode(style_img, enc);
    TensorT<S> t = adain(ec.features, es.features);  // constant w.r.t. decoder

    DecodeCacheT<S> dcache;
    TensorT<S> out = decode(t, dec, &dcache);

    TensorT<S> g_out(out.n, out.c, out.h, out.w);
    bool have_g_out = false;

    if (w.use_content || w.use_style) {
        auto eo = encode(out, enc, /*keep_cache=*/true);
        TensorT<S> g_feat(eo.features.n, eo.features.c, eo.features.h,
                          eo.features.w);
        std::vector<TensorT<S>> tap_grads(enc.taps.size());
        if (w.use_content) {
            TensorT<S> gc;
            b.content = content_loss(eo.features, t, &gc);
            for (size_t i = 0; i < g_feat.data.size(); ++i)
                g_feat.data[i] += static_cast<S>(w.lambda1) * gc.data[i];
        }
        if (w.use_style) {
            std::vector<TensorT<S>> tg;
            b.style = style_loss(eo.taps, es.taps, &tg);
            for (size_t ti = 0; ti < tg.size(); ++ti) {
                tap_grads[ti] = tg[ti];
                for (auto& v : tap_grads[ti].data) v *= static_cast<S>(w.lambda2);
            }
        }
        g_out = encode_backward(enc, eo.acts, g_feat, tap_grads);
        have_g_out = true;
    }

    if (w.use_sparse) {
        TensorT<S> gs;
        double acc = 0;
        // per-sample sum, averaged over the batch
        acc = sparsity_loss(out, masks, &gs) * inv_batch;
        b.sparse = acc;
        if (!have_g_out) g_out = TensorT<S>(out.n, out.c, out.h, out.w);
        for (size_t i = 0; i < g_out.data.size(); ++i)
            g_out.data[i] += static_cast<S>(w.lambda4 * inv_batch) * gs.data[i];
        have_g_out = true;
    }

    if (have_g_out && decoder_grads)
        decode_backward(dec, dcache, g_out, decoder_grads);

    if (w.use_consist) {
        TensorT<S> t_ss = adain(es.features, es.features);
        DecodeCacheT<S> scache;
        TensorT<S> out_ss = decode(t_ss, dec, &scache);
        TensorT<S> gcons;
        b.consist = content_loss(out_ss, style_img, &gcons);
        if (decoder_grads) {
            for (auto& v : gcons.data) v *= static_cast<S>(w.lambda3);
            decode_backward(dec, scache, gcons, decoder_grads);
        }
    }

    total_loss(b, w);
    return b;
}

// ---------------------------------------------------------------------------
// training and inference (float path; see stylenet.cpp)

struct TrainConfig {
    LossWeights weights;
    int iterations = 500;
    int batch = 4;
    float lr = 1e-4f;
    uint64_t seed = 1;
};

struct Checkpoint {
    static constexpr uint32_t kVersion = 1;
    Encoder encoder;
    Decoder decoder;
    uint64_t seed = 0;
    long iteration = 0;
    float lambdas[4] = {1, 1, 1, 10};
};

struct TrainData {
    // all content images share dims; masks align with contents by index
    std::vector<nn::Tensor> contents;  // (1,1,h,w), values in [0,1]
    std::vector<nn::Tensor> masks;     // (1,1,h,w), binary
    std::vector<nn::Tensor> styles;    // (1,1,h,w), values in [0,1]
};

using IterationCallback =
    std::function<void(int iter, const LossBreakdown& losses)>;

Checkpoint train(const TrainConfig& cfg, const TrainData& data,
                 std::ostream* loss_log = nullptr,
                 const IterationCallback& cb = nullptr);

// Pads the photo to a multiple of 8 (white fill), runs one forward pass, and
// crops back; output values in [0,1], 1 = white paper.
nn::Tensor synthesize(const nn::Tensor& photo, const nn::Tensor& style_img,
                      const Checkpoint& ckpt);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace plotbot::style
