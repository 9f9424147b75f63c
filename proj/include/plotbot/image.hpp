#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plotbot/tensor.hpp"

namespace plotbot {

// Grayscale raster, values in [0,1], white-paper/black-ink convention
// (1 = white). A binary image holds only 0 and 1.
struct Image {
    int w = 0, h = 0;
    std::vector<float> px;

    Image() = default;
    Image(int w_, int h_, float fill = 0.0f)
        : w(w_), h(h_), px(static_cast<size_t>(w_) * h_, fill) {}

    float& at(int x, int y) { return px[static_cast<size_t>(y) * w + x]; }
    float at(int x, int y) const { return px[static_cast<size_t>(y) * w + x]; }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < w && y >= 0 && y < h;
    }
    bool is_binary() const {
        for (float v : px)
            if (v != 0.0f && v != 1.0f) return false;
        return true;
    }
};

// Per-pixel facial-component labels, CelebAMask-HQ convention (19 classes).
struct LabelMap {
    static constexpr int kNumClasses = 19;
    // 0 background, 1 skin, 2 left brow, 3 right brow, 4 left eye,
    // 5 right eye, 6 glasses, 7 left ear, 8 right ear, 9 earring, 10 nose,
    // 11 mouth, 12 upper lip, 13 lower lip, 14 neck, 15 necklace, 16 cloth,
    // 17 hair, 18 hat
    static constexpr uint8_t kBackground = 0;
    static constexpr uint8_t kLeftBrow = 2;
    static constexpr uint8_t kRightBrow = 3;
    static constexpr uint8_t kLeftEye = 4;
    static constexpr uint8_t kRightEye = 5;
    static constexpr uint8_t kUpperLip = 12;
    static constexpr uint8_t kLowerLip = 13;
    static constexpr uint8_t kHair = 17;

    int w = 0, h = 0;
    std::vector<uint8_t> ids;

    LabelMap() = default;
    LabelMap(int w_, int h_, uint8_t fill = 0)
        : w(w_), h(h_), ids(static_cast<size_t>(w_) * h_, fill) {}

    uint8_t& at(int x, int y) { return ids[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int x, int y) const {
        return ids[static_cast<size_t>(y) * w + x];
    }
};

// Tensor bridging: (1,1,h,w) <-> Image
nn::Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const nn::Tensor& t, int sample = 0);

// 8-bit grayscale PNG I/O. Color inputs are converted with Rec.601 weights.
Image read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const Image& img);

// Label maps are 8-bit single-channel PNGs holding raw class ids.
LabelMap read_png_labels(const std::string& path);
void write_png_labels(const std::string& path, const LabelMap& labels);

}  // namespace plotbot
