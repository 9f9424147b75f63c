#include "plotbot/plotemit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace plotbot::plot {

namespace {

double quantize_mm(double v) { return std::round(v * 1000.0) / 1000.0; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

}  // namespace

double WorkspaceConfig::scale_for(int px_w, int px_h) const {
    if (px_w <= 0 || px_h <= 0)
        throw UsageError("workspace: non-positive sketch dims");
    const double dw = width_mm - 2 * margin_mm;
    const double dh = height_mm - 2 * margin_mm;
    if (dw <= 0 || dh <= 0)
        throw ConfigError("workspace: margin leaves no drawable area");
    return std::min(dw / px_w, dh / px_h);
}

double PlotProgram::draw_length_mm() const {
    double len = 0;
    bool down = false;
    std::optional<Command> pos;
    for (const auto& c : commands) {
        if (c.kind == CmdKind::PenDown) down = true;
        else if (c.kind == CmdKind::PenUp) down = false;
        else {
            if (pos && down)
                len += std::hypot(c.x - pos->x, c.y - pos->y);
            pos = c;
        }
    }
    return len;
}

double PlotProgram::travel_length_mm() const {
    double len = 0;
    bool down = false;
    std::optional<Command> pos;
    for (const auto& c : commands) {
        if (c.kind == CmdKind::PenDown) down = true;
        else if (c.kind == CmdKind::PenUp) down = false;
        else {
            if (pos && !down)
                len += std::hypot(c.x - pos->x, c.y - pos->y);
            pos = c;
        }
    }
    return len;
}

int PlotProgram::lift_count() const {
    int lifts = 0;
    bool down = false;
    for (const auto& c : commands) {
        if (c.kind == CmdKind::PenDown) down = true;
        else if (c.kind == CmdKind::PenUp) {
            if (down) ++lifts;
            down = false;
        }
    }
    return lifts;
}

double PlotProgram::estimated_time_s() const {
    return draw_length_mm() / feed_mm_s + travel_length_mm() / travel_mm_s +
           lift_count() * pen_lift_s;
}

bool operator==(const Command& a, const Command& b) {
    return a.kind == b.kind && a.x == b.x && a.y == b.y;
}

bool operator==(const PlotProgram& a, const PlotProgram& b) {
    return a.commands == b.commands && a.width_mm == b.width_mm &&
           a.height_mm == b.height_mm && a.feed_mm_s == b.feed_mm_s &&
           a.travel_mm_s == b.travel_mm_s && a.pen_lift_s == b.pen_lift_s;
}

PlotProgram to_machine(const plan::Trajectory& traj, const WorkspaceConfig& ws,
                       int px_w, int px_h) {
    PlotProgram prog;
    prog.width_mm = ws.width_mm;
    prog.height_mm = ws.height_mm;
    prog.feed_mm_s = ws.feed_mm_s;
    prog.travel_mm_s = ws.travel_mm_s;
    prog.pen_lift_s = ws.pen_lift_s;
    if (traj.strokes.empty()) return prog;

    const double s = ws.scale_for(px_w, px_h);
    const double ox = (ws.width_mm - s * px_w) / 2.0;
    const double oy = (ws.height_mm - s * px_h) / 2.0;

    auto map = [&](const plan::Point& p) -> Command {
        Command c;
        c.kind = CmdKind::MoveTo;
        c.x = quantize_mm(ox + s * p.first);
        c.y = quantize_mm(ws.height_mm - oy - s * p.second);
        if (c.x < 0 || c.x > ws.width_mm || c.y < 0 || c.y > ws.height_mm)
            throw DataError("to_machine: coordinate (" + std::to_string(c.x) +
                            "," + std::to_string(c.y) + ") outside workspace");
        return c;
    };

    for (const auto& stroke : traj.strokes) {
        if (stroke.points.empty()) continue;
        prog.commands.push_back(map(stroke.points.front()));
        prog.commands.push_back({CmdKind::PenDown});
        for (size_t i = 1; i < stroke.points.size(); ++i)
            prog.commands.push_back(map(stroke.points[i]));
        prog.commands.push_back({CmdKind::PenUp});
    }
    return prog;
}

std::string emit_gcode(const PlotProgram& prog) {
    std::ostringstream os;
    os << "; plotbot 1\n";
    os << "; workspace " << fmt("%.3f", prog.width_mm) << " "
       << fmt("%.3f", prog.height_mm) << "\n";
    os << "; feed " << fmt("%.3f", prog.feed_mm_s) << "\n";
    os << "; travel " << fmt("%.3f", prog.travel_mm_s) << "\n";
    os << "; lift " << fmt("%.3f", prog.pen_lift_s) << "\n";
    os << "G21\nG90\nM5\n";
    const double feed_mm_min = prog.feed_mm_s * 60.0;
    bool down = false;
    for (const auto& c : prog.commands) {
        switch (c.kind) {
            case CmdKind::PenDown:
                os << "M3 S1000\n";
                down = true;
                break;
            case CmdKind::PenUp:
                os << "M5\n";
                down = false;
                break;
            case CmdKind::MoveTo:
                if (c.x < 0 || c.x > prog.width_mm || c.y < 0 ||
                    c.y > prog.height_mm)
                    throw DataError("emit_gcode: coordinate (" +
                                    std::to_string(c.x) + "," +
                                    std::to_string(c.y) + ") out of bounds");
                if (down)
                    os << "G1 X" << fmt("%.3f", c.x) << " Y" << fmt("%.3f", c.y)
                       << " F" << fmt("%.1f", feed_mm_min) << "\n";
                else
                    os << "G0 X" << fmt("%.3f", c.x) << " Y" << fmt("%.3f", c.y)
                       << "\n";
                break;
        }
    }
    os << "M2\n";
    return os.str();
}

PlotProgram parse_gcode(const std::string& text) {
    PlotProgram prog;
    std::istringstream is(text);
    std::string line;
    bool down = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == ';') {
            std::istringstream cs(line.substr(1));
            std::string key;
            cs >> key;
            if (key == "workspace") cs >> prog.width_mm >> prog.height_mm;
            else if (key == "feed") cs >> prog.feed_mm_s;
            else if (key == "travel") cs >> prog.travel_mm_s;
            else if (key == "lift") cs >> prog.pen_lift_s;
            continue;
        }
        if (line == "G21" || line == "G90" || line == "M2") continue;
        if (line == "M5") {
            if (down) {
                prog.commands.push_back({CmdKind::PenUp});
                down = false;
            }
            continue;  // header pen-up, pen already raised
        }
        if (line.rfind("M3", 0) == 0) {
            if (!down) {
                prog.commands.push_back({CmdKind::PenDown});
                down = true;
            }
            continue;
        }
        if (line.rfind("G0 ", 0) == 0 || line.rfind("G1 ", 0) == 0) {
            Command c;
            c.kind = CmdKind::MoveTo;
            double f = 0;
            const int got = std::sscanf(line.c_str() + 3, "X%lf Y%lf F%lf",
                                        &c.x, &c.y, &f);
            if (got < 2) throw DataError("gcode: malformed move: " + line);
            prog.commands.push_back(c);
            continue;
        }
        throw DataError("gcode: unrecognized line: " + line);
    }
    return prog;
}

std::string emit_svg(const PlotProgram& prog) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
       << fmt("%.3f", prog.width_mm) << "mm\" height=\""
       << fmt("%.3f", prog.height_mm) << "mm\" viewBox=\"0 0 "
       << fmt("%.3f", prog.width_mm) << " " << fmt("%.3f", prog.height_mm)
       << "\">\n";
    bool down = false;
    std::optional<Command> pos;
    std::vector<Command> run;
    auto flush = [&]() {
        if (run.empty()) return;
        os << "  <polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.4\" "
              "stroke-linecap=\"round\" points=\"";
        for (size_t i = 0; i < run.size(); ++i) {
            if (i) os << " ";
            // SVG y grows downward; machine y grows upward
            os << fmt("%.3f", run[i].x) << ","
               << fmt("%.3f", prog.height_mm - run[i].y);
        }
        os << "\"/>\n";
        run.clear();
    };
    for (const auto& c : prog.commands) {
        if (c.kind == CmdKind::PenDown) {
            down = true;
            if (pos) run.push_back(*pos);
        } else if (c.kind == CmdKind::PenUp) {
            down = false;
            flush();
        } else {
            if (down) run.push_back(c);
            pos = c;
        }
    }
    flush();
    os << "</svg>\n";
    return os.str();
}

SimResult simulate(const PlotProgram& prog, double resolution) {
    if (resolution <= 0) throw UsageError("simulate: resolution must be > 0");
    SimResult r;
    const int pw = std::max(1, static_cast<int>(std::lround(prog.width_mm * resolution)));
    const int ph = std::max(1, static_cast<int>(std::lround(prog.height_mm * resolution)));
    r.raster = Image(pw, ph, 1.0f);

    auto to_px = [&](double x, double y) -> plan::Point {
        const int px = std::clamp(static_cast<int>(std::lround(x * resolution)), 0, pw - 1);
        const int py = std::clamp(
            static_cast<int>(std::lround((prog.height_mm - y) * resolution)), 0,
            ph - 1);
        return {px, py};
    };
    auto draw_segment = [&](plan::Point a, plan::Point b) {
        int x0 = a.first, y0 = a.second, x1 = b.first, y1 = b.second;
        const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            r.raster.at(x0, y0) = 0.0f;
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) { err += dy; x0 += sx; }
            if (e2 <= dx) { err += dx; y0 += sy; }
        }
    };

    bool down = false;
    std::optional<Command> pos;
    for (const auto& c : prog.commands) {
        if (c.kind == CmdKind::PenDown) {
            down = true;
            if (pos) {
                auto p = to_px(pos->x, pos->y);
                r.raster.at(p.first, p.second) = 0.0f;  // dot strokes
            }
        } else if (c.kind == CmdKind::PenUp) {
            if (down) ++r.lifts;
            down = false;
        } else {
            if (pos) {
                const double d = std::hypot(c.x - pos->x, c.y - pos->y);
                if (down) {
                    r.draw_length_mm += d;
                    draw_segment(to_px(pos->x, pos->y), to_px(c.x, c.y));
                } else {
                    r.travel_length_mm += d;
                }
            }
            pos = c;
        }
    }
    r.time_s = r.draw_length_mm / prog.feed_mm_s +
               r.travel_length_mm / prog.travel_mm_s + r.lifts * prog.pen_lift_s;
    return r;
}

}  // namespace plotbot::plot
