#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plotbot/image.hpp"

// Mask-driven raster logic: sparsity-mask derivation from parsing labels,
// background removal, binarization, and the regional fusion passes
// (eyebrows, eyeballs, hair).

namespace plotbot::masks {

// Binary mask, 1 = sparsity-encouraged (ink discouraged), 0 = protected.
struct SparsityMask {
    int w = 0, h = 0;
    std::vector<uint8_t> bits;

    SparsityMask() = default;
    SparsityMask(int w_, int h_, uint8_t fill = 1)
        : w(w_), h(h_), bits(static_cast<size_t>(w_) * h_, fill) {}

    uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int x, int y) const {
        return bits[static_cast<size_t>(y) * w + x];
    }
};

struct PatchPlacement {
    Image patch;        // binary eyebrow sketch patch
    int x = 0, y = 0;   // placement rectangle in sketch coordinates
    int w = 0, h = 0;
};

struct FaceAnnotations {
    std::optional<std::pair<int, int>> eye_left;
    std::optional<std::pair<int, int>> eye_right;
    std::vector<PatchPlacement> eyebrow_patches;
};

// Key-value manifest: "eye_left = x y", "eye_right = x y",
// "patch = relative/path.png x y w h" (repeatable). Patch paths resolve
// against the manifest's directory.
FaceAnnotations load_annotations(const std::string& path);

nn::Tensor mask_to_tensor(const SparsityMask& m);

// Pixels labeled background become white; everything else untouched.
Image remove_background(const Image& photo, const LabelMap& labels);

// Zero (protect) the eye/eyebrow/lip classes and every inter-class boundary
// pixel (4-neighborhood label transition), then grow the zero set by a
// Euclidean disk of radius r. r = 0 disables growth.
SparsityMask derive_sparsity_mask(const LabelMap& labels, int radius);

// Proportional default: 3 px at 512-px resolution.
int default_mask_radius(int height);

// value >= threshold -> 1 (white); exact threshold goes white.
Image binarize(const Image& sketch, float threshold = 0.5f);

// Dilates the white region with a 3x3 element `iterations` times, which
// erodes black ink. Ink never grows.
Image thin_ink(const Image& binary, int iterations);

struct FuseResult {
    Image sketch;
    bool applied = false;  // false = no patches given, input passed through
};

// Replaces eyebrow-labeled pixels covered by a patch rectangle with the
// thinned patch content; everything else is bit-identical to the input.
FuseResult fuse_eyebrows(const Image& global_sketch,
                         const FaceAnnotations& annotations,
                         const LabelMap& labels, int thin_iterations = 1);

// Stamps a filled black disk at each eye center whose surrounding
// check-radius disk is entirely white. spot_radius <= 0 picks the default
// (1.5% of image height, at least 1 px).
Image renew_eyeballs(const Image& sketch, const FaceAnnotations& annotations,
                     int check_radius = 2, int spot_radius = 0);

// Hair-labeled pixels come from hair_sketch, all others from primary.
Image style_fuse_hair(const Image& primary, const Image& hair_sketch,
                      const LabelMap& labels);

}  // namespace plotbot::masks
