#pragma once

#include <string>
#include <vector>

#include "plotbot/pathplan.hpp"

// Maps trajectories from pixel space to the machine workspace, emits G-code
// and SVG, and simulates the result back to a raster for verification.
//
// G-code dialect (bit-exact): header "G21\nG90\nM5\n", pen-down "M3 S1000",
// pen-up "M5", travel "G0 X%.3f Y%.3f", draw "G1 X%.3f Y%.3f F%.1f" with the
// feed in mm/min, footer "M2\n". Coordinates are quantized to 0.001 mm when
// mapped into the workspace, so emit -> parse -> emit is a fixed point.

namespace plotbot::plot {

struct WorkspaceConfig {
    double width_mm = 160.0;
    double height_mm = 160.0;
    double margin_mm = 0.0;
    double feed_mm_s = 20.0;       // pen-down speed
    double travel_mm_s = 100.0;    // pen-up speed
    double pen_lift_s = 0.4;

    double scale_for(int px_w, int px_h) const;
};

enum class CmdKind { PenUp, PenDown, MoveTo };

struct Command {
    CmdKind kind = CmdKind::PenUp;
    double x = 0, y = 0;  // mm, MoveTo only
};

struct PlotProgram {
    std::vector<Command> commands;
    double width_mm = 160.0;
    double height_mm = 160.0;
    double feed_mm_s = 20.0;
    double travel_mm_s = 100.0;
    double pen_lift_s = 0.4;

    double draw_length_mm() const;
    double travel_length_mm() const;
    int lift_count() const;  // pen-down -> pen-up transitions
    double estimated_time_s() const;
};

bool operator==(const Command& a, const Command& b);
bool operator==(const PlotProgram& a, const PlotProgram& b);

// Uniform scale, centering, y-flip (raster row-down to machine y-up), strict
// containment in bounds. Empty trajectory yields an empty, valid program.
PlotProgram to_machine(const plan::Trajectory& traj, const WorkspaceConfig& ws,
                       int px_w, int px_h);

std::string emit_gcode(const PlotProgram& prog);
PlotProgram parse_gcode(const std::string& text);

// One polyline per pen-down run; document size equals the workspace in mm.
std::string emit_svg(const PlotProgram& prog);

struct SimResult {
    Image raster;  // binary, 1 = white paper; machine y-up flipped back to rows
    double draw_length_mm = 0;
    double travel_length_mm = 0;
    int lifts = 0;
    double time_s = 0;
};

// Rasterizes pen-down segments with a 1-px pen at `resolution` px/mm.
SimResult simulate(const PlotProgram& prog, double resolution);

}  // namespace plotbot::plot
