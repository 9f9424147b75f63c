#include "plotbot/pathplan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace plotbot::plan {

namespace {

// clockwise from north
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

struct Bitmap {
    int w = 0, h = 0;
    std::vector<uint8_t> bits;
    Bitmap(int w_, int h_) : w(w_), h(h_), bits(static_cast<size_t>(w_) * h_, 0) {}
    uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * w + x]; }
    bool in(int x, int y) const { return x >= 0 && x < w && y >= 0 && y < h; }
    bool empty() const {
        return std::find(bits.begin(), bits.end(), 1) == bits.end();
    }
};

int neighbor_count(const Bitmap& b, int x, int y) {
    int n = 0;
    for (int k = 0; k < 8; ++k) {
        const int nx = x + kDx[k], ny = y + kDy[k];
        if (b.in(nx, ny) && b.at(nx, ny)) ++n;
    }
    return n;
}

// Zhang-Suen neighbor ring P2..P9: N, NE, E, SE, S, SW, W, NW (matches kDx/kDy)
void neighbor_ring(const Bitmap& b, int x, int y, int p[8]) {
    for (int k = 0; k < 8; ++k) {
        const int nx = x + kDx[k], ny = y + kDy[k];
        p[k] = (b.in(nx, ny) && b.at(nx, ny)) ? 1 : 0;
    }
}

bool zhang_suen_pass(Bitmap& b, int sub) {
    std::vector<Point> to_delete;
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < b.w; ++x) {
            if (!b.at(x, y)) continue;
            int p[8];
            neighbor_ring(b, x, y, p);
            const int bsum = std::accumulate(p, p + 8, 0);
            if (bsum < 2 || bsum > 6) continue;
            int a = 0;
            for (int k = 0; k < 8; ++k)
                if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
            if (a != 1) continue;
            // ring indices: 0=P2(N), 2=P4(E), 4=P6(S), 6=P8(W)
            if (sub == 0) {
                if (p[0] * p[2] * p[4] != 0) continue;
                if (p[2] * p[4] * p[6] != 0) continue;
            } else {
                if (p[0] * p[2] * p[6] != 0) continue;
                if (p[0] * p[4] * p[6] != 0) continue;
            }
            to_delete.emplace_back(x, y);
        }
    for (const auto& [x, y] : to_delete) b.at(x, y) = 0;
    return !to_delete.empty();
}

Bitmap erode3x3(const Bitmap& b) {
    Bitmap out(b.w, b.h);
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < b.w; ++x) {
            if (!b.at(x, y)) continue;
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy)
                for (int dx = -1; dx <= 1 && keep; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (!b.in(nx, ny) || !b.at(nx, ny)) keep = false;
                }
            if (keep) out.at(x, y) = 1;
        }
    return out;
}

std::vector<Bitmap> connected_components(const Bitmap& b) {
    std::vector<Bitmap> comps;
    Bitmap seen(b.w, b.h);
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < b.w; ++x) {
            if (!b.at(x, y) || seen.at(x, y)) continue;
            Bitmap comp(b.w, b.h);
            std::deque<Point> q{{x, y}};
            seen.at(x, y) = 1;
            comp.at(x, y) = 1;
            while (!q.empty()) {
                auto [cx, cy] = q.front();
                q.pop_front();
                for (int k = 0; k < 8; ++k) {
                    const int nx = cx + kDx[k], ny = cy + kDy[k];
                    if (b.in(nx, ny) && b.at(nx, ny) && !seen.at(nx, ny)) {
                        seen.at(nx, ny) = 1;
                        comp.at(nx, ny) = 1;
                        q.emplace_back(nx, ny);
                    }
                }
            }
            comps.push_back(std::move(comp));
        }
    return comps;
}

// Orders a thin ring (or ring fragment) into closed loops by walking
// unvisited 8-neighbors, preferring the clockwise-from-north order.
void ring_to_loops(const Bitmap& ring, std::vector<Stroke>& out) {
    Bitmap visited(ring.w, ring.h);
    for (int y = 0; y < ring.h; ++y)
        for (int x = 0; x < ring.w; ++x) {
            if (!ring.at(x, y) || visited.at(x, y)) continue;
            Stroke loop;
            loop.kind = StrokeKind::FillLoop;
            int cx = x, cy = y;
            visited.at(cx, cy) = 1;
            loop.points.emplace_back(cx, cy);
            for (;;) {
                int next = -1;
                for (int k = 0; k < 8; ++k) {
                    const int nx = cx + kDx[k], ny = cy + kDy[k];
                    if (ring.in(nx, ny) && ring.at(nx, ny) && !visited.at(nx, ny)) {
                        next = k;
                        break;
                    }
                }
                if (next < 0) break;
                cx += kDx[next];
                cy += kDy[next];
                visited.at(cx, cy) = 1;
                loop.points.emplace_back(cx, cy);
            }
            out.push_back(std::move(loop));
        }
}

double dist(const Point& a, const Point& b) {
    const double dx = a.first - b.first, dy = a.second - b.second;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

size_t Skeleton::pixel_count() const {
    return static_cast<size_t>(std::count(bits.begin(), bits.end(), 1));
}

Skeleton skeletonize(const Image& binary_sketch) {
    if (!binary_sketch.is_binary())
        throw UsageError("skeletonize: input is not binary");
    Bitmap fg(binary_sketch.w, binary_sketch.h);
    for (int y = 0; y < fg.h; ++y)
        for (int x = 0; x < fg.w; ++x)
            fg.at(x, y) = binary_sketch.at(x, y) == 0.0f ? 1 : 0;

    bool changed = true;
    while (changed) {
        changed = zhang_suen_pass(fg, 0);
        changed = zhang_suen_pass(fg, 1) || changed;
    }

    Skeleton sk(fg.w, fg.h);
    sk.bits = fg.bits;
    for (int y = 0; y < fg.h; ++y)
        for (int x = 0; x < fg.w; ++x) {
            if (!fg.at(x, y)) continue;
            const int n = neighbor_count(fg, x, y);
            if (n <= 1) sk.endpoints.emplace_back(x, y);
            else if (n >= 3) sk.branch_points.emplace_back(x, y);
        }
    return sk;
}

GradientField canny_gradient(const Image& gray, const CannyParams& params) {
    const int w = gray.w, h = gray.h;
    GradientField g;
    g.w = w;
    g.h = h;
    g.orientation.assign(static_cast<size_t>(w) * h, 0.0f);
    g.magnitude.assign(static_cast<size_t>(w) * h, 0.0f);
    g.edge.assign(static_cast<size_t>(w) * h, 0);
    if (w == 0 || h == 0) return g;

    auto clampx = [&](int x) { return std::clamp(x, 0, w - 1); };
    auto clampy = [&](int y) { return std::clamp(y, 0, h - 1); };

    // separable Gaussian
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * params.sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (params.sigma * params.sigma));
        ksum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= ksum;

    std::vector<float> tmp(static_cast<size_t>(w) * h), blur(tmp.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * gray.at(clampx(x + i), y);
            tmp[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp[static_cast<size_t>(clampy(y + i)) * w + x];
            blur[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
        }

    auto bl = [&](int x, int y) {
        return blur[static_cast<size_t>(clampy(y)) * w + clampx(x)];
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = (bl(x + 1, y - 1) + 2 * bl(x + 1, y) + bl(x + 1, y + 1)) -
                              (bl(x - 1, y - 1) + 2 * bl(x - 1, y) + bl(x - 1, y + 1));
            const double gy = (bl(x - 1, y + 1) + 2 * bl(x, y + 1) + bl(x + 1, y + 1)) -
                              (bl(x - 1, y - 1) + 2 * bl(x, y - 1) + bl(x + 1, y - 1));
            const size_t i = static_cast<size_t>(y) * w + x;
            g.magnitude[i] = static_cast<float>(std::sqrt(gx * gx + gy * gy));
            g.orientation[i] =
                g.magnitude[i] > 0 ? static_cast<float>(std::atan2(gy, gx)) : 0.0f;
        }

    // non-maximum suppression along the gradient direction
    std::vector<uint8_t> nms(g.magnitude.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const float m = g.magnitude[i];
            if (m < params.low_threshold) continue;
            double ang = g.orientation[i];
            if (ang < 0) ang += M_PI;
            int dx, dy;
            if (ang < M_PI / 8 || ang >= 7 * M_PI / 8) { dx = 1; dy = 0; }
            else if (ang < 3 * M_PI / 8) { dx = 1; dy = 1; }
            else if (ang < 5 * M_PI / 8) { dx = 0; dy = 1; }
            else { dx = -1; dy = 1; }
            const float m1 = g.magnitude[static_cast<size_t>(clampy(y + dy)) * w + clampx(x + dx)];
            const float m2 = g.magnitude[static_cast<size_t>(clampy(y - dy)) * w + clampx(x - dx)];
            if (m >= m1 && m >= m2) nms[i] = 1;
        }

    // hysteresis: grow strong edges over weak neighbors
    std::deque<Point> q;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (nms[i] && g.magnitude[i] >= params.high_threshold) {
                g.edge[i] = 1;
                q.emplace_back(x, y);
            }
        }
    while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop_front();
        for (int k = 0; k < 8; ++k) {
            const int nx = cx + kDx[k], ny = cy + kDy[k];
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            const size_t i = static_cast<size_t>(ny) * w + nx;
            if (nms[i] && !g.edge[i] && g.magnitude[i] >= params.low_threshold) {
                g.edge[i] = 1;
                q.emplace_back(nx, ny);
            }
        }
    }
    return g;
}

std::vector<Stroke> trace_strokes(const Skeleton& skeleton,
                                  const GradientField& grad) {
    // thinness check: no fully set 2x2 block
    for (int y = 0; y + 1 < skeleton.h; ++y)
        for (int x = 0; x + 1 < skeleton.w; ++x)
            if (skeleton.at(x, y) && skeleton.at(x + 1, y) &&
                skeleton.at(x, y + 1) && skeleton.at(x + 1, y + 1))
                throw UsageError("trace_strokes: skeleton not thin, 2x2 block at (" +
                                 std::to_string(x) + "," + std::to_string(y) + ")");
    const bool have_grad = grad.w == skeleton.w && grad.h == skeleton.h;

    Bitmap visited(skeleton.w, skeleton.h);
    auto unvisited_neighbors = [&](int x, int y) {
        int n = 0;
        for (int k = 0; k < 8; ++k) {
            const int nx = x + kDx[k], ny = y + kDy[k];
            if (visited.in(nx, ny) && skeleton.at(nx, ny) && !visited.at(nx, ny))
                ++n;
        }
        return n;
    };

    std::vector<Stroke> strokes;
    size_t remaining = skeleton.pixel_count();
    while (remaining > 0) {
        // seed: first unvisited endpoint in scan order, else first unvisited
        Point seed{-1, -1};
        for (int y = 0; y < skeleton.h && seed.first < 0; ++y)
            for (int x = 0; x < skeleton.w; ++x)
                if (skeleton.at(x, y) && !visited.at(x, y) &&
                    unvisited_neighbors(x, y) <= 1) {
                    seed = {x, y};
                    break;
                }
        if (seed.first < 0)
            for (int y = 0; y < skeleton.h && seed.first < 0; ++y)
                for (int x = 0; x < skeleton.w; ++x)
                    if (skeleton.at(x, y) && !visited.at(x, y)) {
                        seed = {x, y};
                        break;
                    }

        Stroke stroke;
        stroke.kind = StrokeKind::Line;
        int cx = seed.first, cy = seed.second;
        visited.at(cx, cy) = 1;
        --remaining;
        stroke.points.emplace_back(cx, cy);
        for (;;) {
            int best = -1;
            double best_score = -1;
            // orthogonal steps outrank diagonals on ties so corners are not
            // cut; within each ring the order stays clockwise from north
            static const int kOrder[8] = {0, 2, 4, 6, 1, 3, 5, 7};
            for (int ki = 0; ki < 8; ++ki) {
                const int k = kOrder[ki];
                const int nx = cx + kDx[k], ny = cy + kDy[k];
                if (!visited.in(nx, ny) || !skeleton.at(nx, ny) ||
                    visited.at(nx, ny))
                    continue;
                double score = 0;
                if (have_grad && grad.mag_at(cx, cy) > 0) {
                    // local tangent = gradient rotated 90 degrees
                    const double tangent = grad.orient_at(cx, cy) + M_PI / 2;
                    const double cand = std::atan2(kDy[k], kDx[k]);
                    score = std::fabs(std::cos(cand - tangent));
                }
                // strict > keeps the clockwise-from-north tie-break
                if (score > best_score + 1e-12) {
                    best_score = score;
                    best = k;
                }
            }
            if (best < 0) break;
            cx += kDx[best];
            cy += kDy[best];
            visited.at(cx, cy) = 1;
            --remaining;
            stroke.points.emplace_back(cx, cy);
        }
        strokes.push_back(std::move(stroke));
    }
    return strokes;
}

std::vector<uint8_t> fill_region_mask(const Image& binary_sketch,
                                      const LabelMap& labels,
                                      int pen_thickness) {
    if (binary_sketch.w != labels.w || binary_sketch.h != labels.h)
        throw ShapeError("fill_region_mask: sketch vs labels dims");
    if (!binary_sketch.is_binary())
        throw UsageError("fill_region_mask: input is not binary");

    Bitmap candidates(binary_sketch.w, binary_sketch.h);
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x) {
            const uint8_t id = labels.at(x, y);
            const bool mark_label =
                id == LabelMap::kLeftBrow || id == LabelMap::kRightBrow ||
                id == LabelMap::kLeftEye || id == LabelMap::kRightEye;
            if (mark_label && binary_sketch.at(x, y) == 0.0f)
                candidates.at(x, y) = 1;
        }

    std::vector<uint8_t> mask(candidates.bits.size(), 0);
    for (const auto& comp : connected_components(candidates)) {
        Bitmap eroded = comp;
        for (int i = 0; i < pen_thickness; ++i) eroded = erode3x3(eroded);
        if (eroded.empty()) continue;  // thin mark, leave to line tracing
        for (size_t i = 0; i < mask.size(); ++i)
            if (comp.bits[i]) mask[i] = 1;
    }
    return mask;
}

std::vector<Stroke> plan_fills(const Image& binary_sketch,
                               const LabelMap& labels, int pen_thickness) {
    const auto mask = fill_region_mask(binary_sketch, labels, pen_thickness);
    Bitmap regions(binary_sketch.w, binary_sketch.h);
    regions.bits.assign(mask.begin(), mask.end());

    std::vector<Stroke> loops;
    for (auto& comp : connected_components(regions)) {
        Bitmap cur = comp;
        while (!cur.empty()) {
            Bitmap inner = erode3x3(cur);
            Bitmap ring(cur.w, cur.h);
            for (size_t i = 0; i < cur.bits.size(); ++i)
                ring.bits[i] = cur.bits[i] && !inner.bits[i];
            ring_to_loops(ring, loops);
            cur = std::move(inner);
        }
    }
    return loops;
}

Trajectory order_strokes(const std::vector<Stroke>& strokes) {
    Trajectory traj;
    if (strokes.empty()) return traj;

    auto cost_of = [](const std::vector<Stroke>& ordered) {
        double c = 0;
        for (size_t i = 0; i + 1 < ordered.size(); ++i)
            c += dist(ordered[i].points.back(), ordered[i + 1].points.front());
        return c;
    };

    const size_t n = strokes.size();
    std::vector<bool> used(n, false);
    std::vector<Stroke> ordered;
    ordered.reserve(n);

    // first stroke: endpoint nearest the origin, entered at that endpoint
    Point cur{0, 0};
    for (size_t step = 0; step < n; ++step) {
        size_t best = 0;
        bool best_rev = false;
        double best_d = std::numeric_limits<double>::max();
        for (size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            const double df = dist(cur, strokes[i].points.front());
            const double db = dist(cur, strokes[i].points.back());
            if (df < best_d) {
                best_d = df;
                best = i;
                best_rev = false;
            }
            if (db < best_d) {
                best_d = db;
                best = i;
                best_rev = true;
            }
        }
        used[best] = true;
        Stroke s = strokes[best];
        if (best_rev) std::reverse(s.points.begin(), s.points.end());
        cur = s.points.back();
        ordered.push_back(std::move(s));
    }

    // 2-opt refinement: reversing a run of strokes (and each stroke in it)
    // leaves internal hops unchanged, so only the two boundary hops matter
    bool improved = true;
    for (int pass = 0; improved && pass < 25; ++pass) {
        improved = false;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i; j < n; ++j) {
                double before = 0, after = 0;
                if (i > 0) {
                    before += dist(ordered[i - 1].points.back(),
                                   ordered[i].points.front());
                    after += dist(ordered[i - 1].points.back(),
                                  ordered[j].points.back());
                }
                if (j + 1 < n) {
                    before += dist(ordered[j].points.back(),
                                   ordered[j + 1].points.front());
                    after += dist(ordered[i].points.front(),
                                  ordered[j + 1].points.front());
                }
                if (after + 1e-12 < before) {
                    std::reverse(ordered.begin() + i, ordered.begin() + j + 1);
                    for (size_t k = i; k <= j; ++k)
                        std::reverse(ordered[k].points.begin(),
                                     ordered[k].points.end());
                    improved = true;
                }
            }
    }

    const double greedy_cost = cost_of(ordered);
    const double input_cost = cost_of(strokes);
    if (input_cost < greedy_cost) {
        traj.strokes = strokes;
        traj.pen_up_distance = input_cost;
    } else {
        traj.strokes = std::move(ordered);
        traj.pen_up_distance = greedy_cost;
    }
    return traj;
}

void dump_trajectory(std::ostream& os, const Trajectory& traj) {
    os << "strokes " << traj.strokes.size() << " pen_up_px "
       << traj.pen_up_distance << "\n";
    for (const auto& s : traj.strokes) {
        os << (s.kind == StrokeKind::Line ? "line" : "fill") << " "
           << s.points.size();
        for (const auto& [x, y] : s.points) os << " " << x << " " << y;
        os << "\n";
    }
}

}  // namespace plotbot::plan
