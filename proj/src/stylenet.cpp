#include "plotbot/stylenet.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace plotbot::style {

namespace {

constexpr char kMagic[8] = {'P', 'B', 'S', 'K', 'E', 'T', 'C', 'H'};

std::string layer_line(const nn::LayerSpec& l) {
    std::ostringstream os;
    switch (l.kind) {
        case nn::LayerKind::Conv2d:
            os << "conv " << l.out_c << " " << l.in_c << " " << l.kh << " "
               << l.kw << " " << l.stride << " " << l.pad;
            break;
        case nn::LayerKind::Relu: os << "relu"; break;
        case nn::LayerKind::Upsample2x: os << "up2x"; break;
        case nn::LayerKind::ReflectPad: os << "pad " << l.pad; break;
    }
    return os.str();
}

nn::LayerSpec parse_layer_line(const std::string& line) {
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    if (kind == "conv") {
        int oc, ic, kh, kw, stride, pad;
        if (!(is >> oc >> ic >> kh >> kw >> stride >> pad))
            throw DataError("checkpoint: malformed conv layer line: " + line);
        return nn::LayerSpec::conv(oc, ic, kh, kw, stride, pad);
    }
    if (kind == "relu") return nn::LayerSpec::relu();
    if (kind == "up2x") return nn::LayerSpec::upsample2x();
    if (kind == "pad") {
        int w;
        if (!(is >> w))
            throw DataError("checkpoint: malformed pad layer line: " + line);
        return nn::LayerSpec::reflect_pad(w);
    }
    throw DataError("checkpoint: unknown layer kind: " + line);
}

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
}

void write_blob(std::ostream& os, const std::vector<float>& v) {
    // weight blobs are little-endian float32; raw write on LE hosts
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_blob(std::istream& is, std::vector<float>& v) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!is) throw DataError("checkpoint: truncated weight blob");
}

void write_stack_blobs(std::ostream& os, const LayerStackT<float>& stack) {
    for (const auto& l : stack)
        if (l.kind == nn::LayerKind::Conv2d) {
            write_blob(os, l.kernel);
            write_blob(os, l.bias);
        }
}

void read_stack_blobs(std::istream& is, LayerStackT<float>& stack) {
    for (auto& l : stack)
        if (l.kind == nn::LayerKind::Conv2d) {
            read_blob(is, l.kernel);
            read_blob(is, l.bias);
        }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open for write: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, Checkpoint::kVersion);

    std::ostringstream hdr;
    hdr << "seed=" << ckpt.seed << "\n";
    hdr << "iteration=" << ckpt.iteration << "\n";
    for (int i = 0; i < 4; ++i)
        hdr << "lambda" << (i + 1) << "=" << ckpt.lambdas[i] << "\n";
    hdr << "encoder.layers=" << ckpt.encoder.layers.size() << "\n";
    for (size_t i = 0; i < ckpt.encoder.layers.size(); ++i)
        hdr << "encoder.layer." << i << "=" << layer_line(ckpt.encoder.layers[i])
            << "\n";
    hdr << "encoder.taps=";
    for (size_t i = 0; i < ckpt.encoder.taps.size(); ++i)
        hdr << (i ? " " : "") << ckpt.encoder.taps[i];
    hdr << "\n";
    hdr << "decoder.layers=" << ckpt.decoder.layers.size() << "\n";
    for (size_t i = 0; i < ckpt.decoder.layers.size(); ++i)
        hdr << "decoder.layer." << i << "=" << layer_line(ckpt.decoder.layers[i])
            << "\n";

    const std::string header = hdr.str();
    write_u32(os, static_cast<uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_stack_blobs(os, ckpt.encoder.layers);
    write_stack_blobs(os, ckpt.decoder.layers);
    if (!os) throw DataError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("checkpoint: bad magic bytes in " + path);
    const uint32_t version = read_u32(is);
    if (version != Checkpoint::kVersion)
        throw DataError("checkpoint: unsupported version " +
                        std::to_string(version));
    const uint32_t hlen = read_u32(is);
    std::string header(hlen, '\0');
    is.read(header.data(), hlen);
    if (!is) throw DataError("checkpoint: truncated header");

    Checkpoint ckpt;
    size_t enc_layers = 0, dec_layers = 0;
    std::vector<std::pair<std::string, std::string>> kvs;
    std::istringstream hs(header);
    std::string line;
    while (std::getline(hs, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kvs.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    auto get = [&](const std::string& key) -> const std::string& {
        for (const auto& [k, v] : kvs)
            if (k == key) return v;
        throw DataError("checkpoint: missing header key " + key);
    };
    ckpt.seed = std::stoull(get("seed"));
    ckpt.iteration = std::stol(get("iteration"));
    for (int i = 0; i < 4; ++i)
        ckpt.lambdas[i] = std::stof(get("lambda" + std::to_string(i + 1)));
    enc_layers = std::stoul(get("encoder.layers"));
    for (size_t i = 0; i < enc_layers; ++i)
        ckpt.encoder.layers.push_back(
            parse_layer_line(get("encoder.layer." + std::to_string(i))));
    {
        std::istringstream ts(get("encoder.taps"));
        int t;
        while (ts >> t) ckpt.encoder.taps.push_back(t);
    }
    dec_layers = std::stoul(get("decoder.layers"));
    for (size_t i = 0; i < dec_layers; ++i)
        ckpt.decoder.layers.push_back(
            parse_layer_line(get("decoder.layer." + std::to_string(i))));

    read_stack_blobs(is, ckpt.encoder.layers);
    read_stack_blobs(is, ckpt.decoder.layers);
    return ckpt;
}

Checkpoint train(const TrainConfig& cfg, const TrainData& data,
                 std::ostream* loss_log, const IterationCallback& cb) {
    if (data.contents.empty() || data.styles.empty())
        throw ConfigError("train: dataset needs at least one content and one style image");
    if (data.masks.size() != data.contents.size())
        throw ConfigError("train: every content image needs a sparsity mask");
    if (cfg.batch < 1) throw ConfigError("train: batch size must be >= 1");

    const auto& first = data.contents.front();
    for (const auto& t : data.contents)
        require_same_dims(t, first, "train contents");
    for (size_t i = 0; i < data.masks.size(); ++i)
        require_same_dims(data.masks[i], data.contents[i], "train masks");

    Rng rng(cfg.seed);
    Checkpoint ckpt;
    ckpt.encoder = make_default_encoder(first.c, rng);
    ckpt.decoder = make_default_decoder(rng);
    ckpt.seed = cfg.seed;
    ckpt.lambdas[0] = cfg.weights.lambda1;
    ckpt.lambdas[1] = cfg.weights.lambda2;
    ckpt.lambdas[2] = cfg.weights.lambda3;
    ckpt.lambdas[3] = cfg.weights.lambda4;

    std::vector<float> params = stack_flatten(ckpt.decoder.layers);
    std::vector<float> grads(params.size(), 0.0f);
    nn::AdamState adam(params.size(), cfg.lr);

    if (loss_log)
        *loss_log << "iter,L_content,L_style,L_consist,L_sparse,total\n";

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const int n = cfg.batch;
        nn::Tensor batch(n, first.c, first.h, first.w);
        nn::Tensor masks(n, 1, first.h, first.w);
        for (int i = 0; i < n; ++i) {
            const uint32_t ci =
                rng.below(static_cast<uint32_t>(data.contents.size()));
            std::copy(data.contents[ci].data.begin(), data.contents[ci].data.end(),
                      batch.data.begin() + static_cast<size_t>(i) * first.c *
                                               first.h * first.w);
            std::copy(data.masks[ci].data.begin(), data.masks[ci].data.end(),
                      masks.data.begin() +
                          static_cast<size_t>(i) * first.h * first.w);
        }
        const uint32_t si = rng.below(static_cast<uint32_t>(data.styles.size()));

        std::fill(grads.begin(), grads.end(), 0.0f);
        LossBreakdown b = compute_batch_grads(
            ckpt.encoder, ckpt.decoder, batch, masks, data.styles[si],
            cfg.weights, &grads);
        nn::adam_update(params, grads, adam);
        stack_unflatten(ckpt.decoder.layers, params);
        ckpt.iteration = iter + 1;

        if (loss_log)
            *loss_log << iter << "," << b.content << "," << b.style << ","
                      << b.consist << "," << b.sparse << "," << b.total << "\n";
        if (cb) cb(iter, b);
    }
    return ckpt;
}

nn::Tensor synthesize(const nn::Tensor& photo, const nn::Tensor& style_img,
                      const Checkpoint& ckpt) {
    if (ckpt.encoder.layers.empty() || ckpt.decoder.layers.empty())
        throw DataError("synthesize: checkpoint has no network");
    // pad to a multiple of 8 with white so the three decoder upsamplings
    // restore the encoder's three downsamplings exactly
    const int ph = (photo.h + 7) / 8 * 8;
    const int pw = (photo.w + 7) / 8 * 8;
    nn::Tensor padded(photo.n, photo.c, ph, pw, 1.0f);
    for (int in = 0; in < photo.n; ++in)
        for (int ic = 0; ic < photo.c; ++ic)
            for (int iy = 0; iy < photo.h; ++iy)
                for (int ix = 0; ix < photo.w; ++ix)
                    padded.at(in, ic, iy, ix) = photo.at(in, ic, iy, ix);

    auto ec = encode(padded, ckpt.encoder);
    auto es = encode(style_img, ckpt.encoder);
    nn::Tensor t = adain(ec.features, es.features);
    nn::Tensor out = decode(t, ckpt.decoder);

    nn::Tensor result(photo.n, 1, photo.h, photo.w);
    for (int in = 0; in < photo.n; ++in)
        for (int iy = 0; iy < photo.h; ++iy)
            for (int ix = 0; ix < photo.w; ++ix)
                result.at(in, 0, iy, ix) = out.at(in, 0, iy, ix);
    return result;
}

}  // namespace plotbot::style
