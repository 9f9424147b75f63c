#include <cmath>
#include <filesystem>
#include <fstream>

#include "plotbot/maskops.hpp"
#include "plotbot/pipeline.hpp"
#include "plotbot/rng.hpp"

// Deterministic synthetic portrait fixtures: a cartoonish face rendered from
// a hand-built label map, a few stroke-style sketches, eyebrow patches, and a
// small training set with per-image jitter.

namespace fs = std::filesystem;

namespace plotbot::pipeline {

namespace {

struct FaceGeometry {
    int s;       // image size
    int jx, jy;  // per-variant jitter in pixels

    int cx() const { return s / 2 + jx; }
    int eye_y() const { return static_cast<int>(s * 0.44) + jy; }
    int eye_dx() const { return static_cast<int>(s * 0.13); }
    int eye_w() const { return std::max(3, s / 10); }
    int eye_h() const { return std::max(2, s / 16); }
    int brow_y() const { return static_cast<int>(s * 0.36) + jy; }
    int brow_h() const { return std::max(2, s / 20); }
};

void fill_rect(LabelMap& m, int x0, int y0, int w, int h, uint8_t id) {
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x)
            if (x >= 0 && x < m.w && y >= 0 && y < m.h) m.at(x, y) = id;
}

void fill_ellipse(LabelMap& m, double cx, double cy, double rx, double ry,
                  uint8_t id) {
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            const double dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) m.at(x, y) = id;
        }
}

LabelMap make_face_labels(int size, int variant) {
    const int jx = variant % 3 - 1;
    const int jy = (variant / 3) % 3 - 1;
    const FaceGeometry g{size, jx, jy};
    LabelMap m(size, size, LabelMap::kBackground);

    fill_rect(m, 0, static_cast<int>(size * 0.88), size, size, 16);  // cloth
    fill_rect(m, g.cx() - size / 8, static_cast<int>(size * 0.76), size / 4,
              static_cast<int>(size * 0.14), 14);  // neck
    fill_ellipse(m, g.cx(), size * 0.34 + jy, size * 0.34, size * 0.26, 17);  // hair
    fill_ellipse(m, g.cx(), size * 0.48 + jy, size * 0.27, size * 0.32, 1);   // skin

    for (int side = 0; side < 2; ++side) {
        const int ex = g.cx() + (side == 0 ? -g.eye_dx() : g.eye_dx());
        fill_rect(m, ex - g.eye_w() / 2, g.brow_y(), g.eye_w(), g.brow_h(),
                  side == 0 ? LabelMap::kLeftBrow : LabelMap::kRightBrow);
        fill_rect(m, ex - g.eye_w() / 2, g.eye_y(), g.eye_w(), g.eye_h(),
                  side == 0 ? LabelMap::kLeftEye : LabelMap::kRightEye);
    }
    fill_rect(m, g.cx() - std::max(1, size / 32), g.eye_y() + g.eye_h(),
              std::max(2, size / 16), static_cast<int>(size * 0.12), 10);  // nose
    const int lip_y = static_cast<int>(size * 0.66) + jy;
    fill_rect(m, g.cx() - size / 10, lip_y, size / 5, std::max(1, size / 28),
              LabelMap::kUpperLip);
    fill_rect(m, g.cx() - size / 10, lip_y + std::max(1, size / 28), size / 5,
              std::max(1, size / 28), LabelMap::kLowerLip);
    return m;
}

Image render_photo(const LabelMap& labels, int variant) {
    Image img(labels.w, labels.h, 1.0f);
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x) {
            float v = 1.0f;
            switch (labels.at(x, y)) {
                case 0: v = 1.0f; break;
                case 1: v = 0.85f; break;
                case LabelMap::kLeftBrow:
                case LabelMap::kRightBrow: v = 0.30f; break;
                case LabelMap::kLeftEye:
                case LabelMap::kRightEye: v = 0.15f; break;
                case 10: v = 0.78f; break;
                case LabelMap::kUpperLip: v = 0.45f; break;
                case LabelMap::kLowerLip: v = 0.40f; break;
                case 14: v = 0.80f; break;
                case 16: v = 0.55f; break;
                case LabelMap::kHair: v = 0.25f; break;
                default: v = 0.9f; break;
            }
            // mild deterministic shading so photos are not flat
            const float shade =
                0.03f * std::sin(0.7f * x + 0.4f * variant) *
                std::cos(0.5f * y - 0.3f * variant);
            img.at(x, y) = std::min(1.0f, std::max(0.0f, v + shade));
        }
    return img;
}

Image make_style_sketch(int size, int variant) {
    Image img(size, size, 1.0f);
    auto dot = [&](int x, int y) {
        if (x >= 0 && x < size && y >= 0 && y < size) img.at(x, y) = 0.0f;
    };
    // a few arcs and slanted lines, shifted per variant
    const int off = (variant * 5) % std::max(1, size / 4);
    for (int x = 2; x < size - 2; ++x) {
        const int y1 = static_cast<int>(size * 0.3 +
                                        size * 0.12 * std::sin(6.0 * x / size + variant));
        dot(x, y1 + off / 2);
    }
    for (int t = 2; t < size - 4; ++t) dot(t + off % 3, size - 4 - t / 2);
    for (int y = size / 4; y < size * 3 / 4; ++y) dot(size / 3 + off / 3, y);
    return img;
}

Image make_brow_patch(int w, int h) {
    Image img(w, h, 1.0f);
    const int bar_y = h / 2;
    for (int x = 1; x < w - 1; ++x) {
        img.at(x, bar_y) = 0.0f;
        if (h > 3) img.at(x, bar_y - 1) = 0.0f;
    }
    return img;
}

}  // namespace

void write_fixture(const std::string& dir, int size, int train_count,
                   uint64_t seed) {
    fs::create_directories(dir);
    fs::create_directories(fs::path(dir) / "patches");
    fs::create_directories(fs::path(dir) / "styles");
    fs::create_directories(fs::path(dir) / "train" / "contents");
    fs::create_directories(fs::path(dir) / "train" / "labels");

    const LabelMap labels = make_face_labels(size, 0);
    write_png_labels((fs::path(dir) / "labels.png").string(), labels);
    write_png_gray((fs::path(dir) / "photo.png").string(),
                   render_photo(labels, 0));

    for (int i = 0; i < 2; ++i)
        write_png_gray((fs::path(dir) / "styles" /
                        ("style" + std::to_string(i + 1) + ".png"))
                           .string(),
                       make_style_sketch(size, i + static_cast<int>(seed % 7)));

    // training set at half resolution to keep toy runs quick
    const int ts = std::max(32, size / 2);
    for (int i = 0; i < train_count; ++i) {
        const LabelMap lm = make_face_labels(ts, i);
        const std::string name =
            (i < 10 ? "c0" : "c") + std::to_string(i) + ".png";
        write_png_labels(
            (fs::path(dir) / "train" / "labels" / name).string(), lm);
        write_png_gray(
            (fs::path(dir) / "train" / "contents" / name).string(),
            render_photo(lm, i));
    }

    // eyebrow patches and eye centers for the fusion ops
    const FaceGeometry g{size, 0, 0};
    const int pw = g.eye_w() + 2, ph = g.brow_h() + 2;
    write_png_gray((fs::path(dir) / "patches" / "brow_left.png").string(),
                   make_brow_patch(pw, ph));
    write_png_gray((fs::path(dir) / "patches" / "brow_right.png").string(),
                   make_brow_patch(pw, ph));
    {
        std::ofstream ann(fs::path(dir) / "annotations.txt");
        ann << "eye_left = " << g.cx() - g.eye_dx() << " "
            << g.eye_y() + g.eye_h() / 2 << "\n";
        ann << "eye_right = " << g.cx() + g.eye_dx() << " "
            << g.eye_y() + g.eye_h() / 2 << "\n";
        ann << "patch = patches/brow_left.png "
            << g.cx() - g.eye_dx() - g.eye_w() / 2 - 1 << " " << g.brow_y() - 1
            << " " << pw << " " << ph << "\n";
        ann << "patch = patches/brow_right.png "
            << g.cx() + g.eye_dx() - g.eye_w() / 2 - 1 << " " << g.brow_y() - 1
            << " " << pw << " " << ph << "\n";
    }

    std::ofstream cf(fs::path(dir) / "config.ini");
    cf << "[paths]\n"
       << "photo = " << dir << "/photo.png\n"
       << "labels = " << dir << "/labels.png\n"
       << "annotations = " << dir << "/annotations.txt\n"
       << "styles = " << dir << "/styles/style1.png, " << dir
       << "/styles/style2.png\n"
       << "checkpoint = " << dir << "/model.ckpt\n"
       << "out = " << dir << "/out\n"
       << "train_contents = " << dir << "/train/contents\n"
       << "train_labels = " << dir << "/train/labels\n\n"
       << "[train]\n"
       << "iterations = 200\n"
       << "batch = 2\n"
       << "lr = 0.0001\n"
       << "lambda1 = 1\nlambda2 = 1\nlambda3 = 1\nlambda4 = 10\n"
       << "seed = " << seed << "\n"
       << "mask_radius = auto\n\n"
       << "[workspace]\n"
       << "width_mm = 160\nheight_mm = 160\nmargin_mm = 5\n"
       << "feed_mm_s = 20\ntravel_mm_s = 100\npen_lift_s = 0.4\n\n"
       << "[stages]\n"
       << "sparsity = on\nfusion = on\nfills = on\n";
}

}  // namespace plotbot::pipeline
