#pragma once

#include <ostream>
#include <utility>
#include <vector>

#include "plotbot/image.hpp"

// Compiles a binary sketch into ordered pen strokes: Zhang-Suen thinning,
// gradient-guided tracing of the skeleton, outside-in fill loops for solid
// marks, and greedy stroke ordering to cut pen-up travel.

namespace plotbot::plan {

using Point = std::pair<int, int>;  // (x, y)

struct Skeleton {
    int w = 0, h = 0;
    std::vector<uint8_t> bits;  // 1 = skeleton ink
    std::vector<Point> endpoints;      // <= 1 skeleton 8-neighbor
    std::vector<Point> branch_points;  // >= 3 skeleton 8-neighbors

    Skeleton() = default;
    Skeleton(int w_, int h_)
        : w(w_), h(h_), bits(static_cast<size_t>(w_) * h_, 0) {}
    uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int x, int y) const {
        return bits[static_cast<size_t>(y) * w + x];
    }
    size_t pixel_count() const;
};

enum class StrokeKind { Line, FillLoop };

struct Stroke {
    StrokeKind kind = StrokeKind::Line;
    std::vector<Point> points;  // consecutive points are 8-neighbors
};

// Per-pixel gradient orientation (radians, [-pi, pi]) and magnitude, plus the
// Canny edge mask after non-maximum suppression and hysteresis.
struct GradientField {
    int w = 0, h = 0;
    std::vector<float> orientation;
    std::vector<float> magnitude;
    std::vector<uint8_t> edge;

    float orient_at(int x, int y) const {
        return orientation[static_cast<size_t>(y) * w + x];
    }
    float mag_at(int x, int y) const {
        return magnitude[static_cast<size_t>(y) * w + x];
    }
};

struct Trajectory {
    std::vector<Stroke> strokes;
    double pen_up_distance = 0;  // between consecutive strokes, px
};

struct CannyParams {
    double sigma = 1.0;
    float low_threshold = 0.05f;
    float high_threshold = 0.15f;
};

// Zhang-Suen iterative thinning to a fixed point. Ink pixels (value 0) are
// the foreground.
Skeleton skeletonize(const Image& binary_sketch);

GradientField canny_gradient(const Image& gray, const CannyParams& params = {});

// Walks the skeleton pixel by pixel: seeds at endpoints (topmost-leftmost
// unvisited pixel for closed loops), and at branch points prefers the
// neighbor best aligned with the local tangent (gradient orientation rotated
// 90 degrees), breaking ties clockwise from north. Every skeleton pixel lands
// in exactly one stroke. grad may be empty (all candidates tie).
std::vector<Stroke> trace_strokes(const Skeleton& skeleton,
                                  const GradientField& grad);

// Ink pixels under eyeball/eyebrow labels whose thickness exceeds the pen
// width (pen_thickness erosions survive); used to divert solid marks from
// line tracing to fill loops.
std::vector<uint8_t> fill_region_mask(const Image& binary_sketch,
                                      const LabelMap& labels,
                                      int pen_thickness = 1);

// Peels each qualifying region boundary-first: trace the boundary ring as a
// closed loop, erode by one pixel, repeat until empty. Loops come
// outermost-first and partition the region exactly.
std::vector<Stroke> plan_fills(const Image& binary_sketch,
                               const LabelMap& labels, int pen_thickness = 1);

// Greedy nearest-neighbor over stroke endpoints starting from the stroke
// nearest the image origin, refined with 2-opt segment reversals; strokes may
// be reversed. Falls back to the input order when that is still cheaper.
Trajectory order_strokes(const std::vector<Stroke>& strokes);

// One stroke per record: "<kind> <n> x0 y0 x1 y1 ..."
void dump_trajectory(std::ostream& os, const Trajectory& traj);

}  // namespace plotbot::plan
