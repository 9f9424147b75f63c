#include "plotbot/maskops.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace plotbot::masks {

namespace {

bool is_protected_class(uint8_t id) {
    return id == LabelMap::kLeftBrow || id == LabelMap::kRightBrow ||
           id == LabelMap::kLeftEye || id == LabelMap::kRightEye ||
           id == LabelMap::kUpperLip || id == LabelMap::kLowerLip;
}

void require_dims(int aw, int ah, int bw, int bh, const char* where) {
    if (aw != bw || ah != bh)
        throw ShapeError(std::string(where) + ": " + std::to_string(aw) + "x" +
                         std::to_string(ah) + " vs " + std::to_string(bw) + "x" +
                         std::to_string(bh));
}

void require_binary(const Image& img, const char* where) {
    if (!img.is_binary())
        throw UsageError(std::string(where) + ": input is not binary");
}

}  // namespace

FaceAnnotations load_annotations(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("annotations: cannot open " + path);
    const auto dir = std::filesystem::path(path).parent_path();

    FaceAnnotations ann;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("annotations: malformed line: " + line);
        std::string key = line.substr(0, eq);
        key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
        std::istringstream vs(line.substr(eq + 1));
        if (key == "eye_left" || key == "eye_right") {
            int x, y;
            if (!(vs >> x >> y))
                throw DataError("annotations: bad coordinates: " + line);
            (key == "eye_left" ? ann.eye_left : ann.eye_right) = {x, y};
        } else if (key == "patch") {
            std::string rel;
            PatchPlacement p;
            if (!(vs >> rel >> p.x >> p.y >> p.w >> p.h))
                throw DataError("annotations: bad patch entry: " + line);
            p.patch = read_png_gray((dir / rel).string());
            ann.eyebrow_patches.push_back(std::move(p));
        } else {
            throw DataError("annotations: unknown key: " + key);
        }
    }
    return ann;
}

nn::Tensor mask_to_tensor(const SparsityMask& m) {
    nn::Tensor t(1, 1, m.h, m.w);
    for (size_t i = 0; i < m.bits.size(); ++i)
        t.data[i] = static_cast<float>(m.bits[i]);
    return t;
}

Image remove_background(const Image& photo, const LabelMap& labels) {
    require_dims(photo.w, photo.h, labels.w, labels.h, "remove_background");
    Image out = photo;
    for (int y = 0; y < photo.h; ++y)
        for (int x = 0; x < photo.w; ++x)
            if (labels.at(x, y) == LabelMap::kBackground) out.at(x, y) = 1.0f;
    return out;
}

int default_mask_radius(int height) {
    return static_cast<int>(std::lround(3.0 * height / 512.0));
}

SparsityMask derive_sparsity_mask(const LabelMap& labels, int radius) {
    if (radius < 0) throw UsageError("derive_sparsity_mask: negative radius");
    for (uint8_t id : labels.ids)
        if (id >= LabelMap::kNumClasses)
            throw DataError("derive_sparsity_mask: unknown label id " +
                            std::to_string(id));

    SparsityMask zero(labels.w, labels.h, 0);  // 1 marks the zero (protected) set
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x) {
            const uint8_t id = labels.at(x, y);
            bool z = is_protected_class(id);
            if (!z) {
                static const int dx[4] = {1, -1, 0, 0};
                static const int dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4 && !z; ++k) {
                    const int nx = x + dx[k], ny = y + dy[k];
                    if (nx >= 0 && nx < labels.w && ny >= 0 && ny < labels.h &&
                        labels.at(nx, ny) != id)
                        z = true;
                }
            }
            zero.at(x, y) = z ? 1 : 0;
        }

    SparsityMask mask(labels.w, labels.h, 1);
    if (radius == 0) {
        for (size_t i = 0; i < mask.bits.size(); ++i)
            mask.bits[i] = zero.bits[i] ? 0 : 1;
        return mask;
    }
    // dilate the zero set with a disk: dx^2 + dy^2 <= r^2
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x) {
            if (!zero.at(x, y)) continue;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (dx * dx + dy * dy > radius * radius) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && nx < labels.w && ny >= 0 && ny < labels.h)
                        mask.at(nx, ny) = 0;
                }
        }
    return mask;
}

Image binarize(const Image& sketch, float threshold) {
    Image out(sketch.w, sketch.h);
    for (size_t i = 0; i < sketch.px.size(); ++i)
        out.px[i] = sketch.px[i] >= threshold ? 1.0f : 0.0f;
    return out;
}

Image thin_ink(const Image& binary, int iterations) {
    require_binary(binary, "thin_ink");
    Image cur = binary;
    for (int it = 0; it < iterations; ++it) {
        Image next = cur;
        for (int y = 0; y < cur.h; ++y)
            for (int x = 0; x < cur.w; ++x) {
                if (cur.at(x, y) == 1.0f) continue;
                // black pixel turns white if any 3x3 neighbor is white
                bool has_white = false;
                for (int dy = -1; dy <= 1 && !has_white; ++dy)
                    for (int dx = -1; dx <= 1 && !has_white; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (cur.in_bounds(nx, ny) && cur.at(nx, ny) == 1.0f)
                            has_white = true;
                    }
                if (has_white) next.at(x, y) = 1.0f;
            }
        cur = std::move(next);
    }
    return cur;
}

FuseResult fuse_eyebrows(const Image& global_sketch,
                         const FaceAnnotations& annotations,
                         const LabelMap& labels, int thin_iterations) {
    require_dims(global_sketch.w, global_sketch.h, labels.w, labels.h,
                 "fuse_eyebrows");
    require_binary(global_sketch, "fuse_eyebrows");
    if (annotations.eyebrow_patches.empty())
        return {global_sketch, false};  // no patches: warn via status

    FuseResult r{global_sketch, true};
    for (const auto& p : annotations.eyebrow_patches) {
        if (p.x < 0 || p.y < 0 || p.x + p.w > labels.w || p.y + p.h > labels.h)
            throw DataError("fuse_eyebrows: patch rectangle out of bounds");
        Image thinned = thin_ink(binarize(p.patch), thin_iterations);
        for (int y = 0; y < p.h; ++y)
            for (int x = 0; x < p.w; ++x) {
                const int sx = p.x + x, sy = p.y + y;
                const uint8_t id = labels.at(sx, sy);
                if (id != LabelMap::kLeftBrow && id != LabelMap::kRightBrow)
                    continue;
                const int px = std::min(x * thinned.w / std::max(p.w, 1),
                                        thinned.w - 1);
                const int py = std::min(y * thinned.h / std::max(p.h, 1),
                                        thinned.h - 1);
                r.sketch.at(sx, sy) = thinned.at(px, py);
            }
    }
    return r;
}

Image renew_eyeballs(const Image& sketch, const FaceAnnotations& annotations,
                     int check_radius, int spot_radius) {
    require_binary(sketch, "renew_eyeballs");
    if (spot_radius <= 0)
        spot_radius = std::max(1, static_cast<int>(std::lround(0.015 * sketch.h)));

    Image out = sketch;
    auto renew_one = [&](int cx, int cy) {
        if (!sketch.in_bounds(cx, cy))
            throw DataError("renew_eyeballs: eye center (" + std::to_string(cx) +
                            "," + std::to_string(cy) + ") out of bounds");
        for (int dy = -check_radius; dy <= check_radius; ++dy)
            for (int dx = -check_radius; dx <= check_radius; ++dx) {
                if (dx * dx + dy * dy > check_radius * check_radius) continue;
                const int nx = cx + dx, ny = cy + dy;
                if (sketch.in_bounds(nx, ny) && sketch.at(nx, ny) == 0.0f)
                    return;  // ink present, leave the eye alone
            }
        for (int dy = -spot_radius; dy <= spot_radius; ++dy)
            for (int dx = -spot_radius; dx <= spot_radius; ++dx) {
                if (dx * dx + dy * dy > spot_radius * spot_radius) continue;
                const int nx = cx + dx, ny = cy + dy;
                if (out.in_bounds(nx, ny)) out.at(nx, ny) = 0.0f;
            }
    };
    if (annotations.eye_left)
        renew_one(annotations.eye_left->first, annotations.eye_left->second);
    if (annotations.eye_right)
        renew_one(annotations.eye_right->first, annotations.eye_right->second);
    return out;
}

Image style_fuse_hair(const Image& primary, const Image& hair_sketch,
                      const LabelMap& labels) {
    require_dims(primary.w, primary.h, labels.w, labels.h, "style_fuse_hair");
    require_dims(hair_sketch.w, hair_sketch.h, labels.w, labels.h,
                 "style_fuse_hair");
    require_binary(primary, "style_fuse_hair");
    require_binary(hair_sketch, "style_fuse_hair");
    Image out = primary;
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x)
            if (labels.at(x, y) == LabelMap::kHair)
                out.at(x, y) = hair_sketch.at(x, y);
    return out;
}

}  // namespace plotbot::masks
