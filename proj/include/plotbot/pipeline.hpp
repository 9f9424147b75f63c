#pragma once

#include <map>
#include <string>
#include <vector>

#include "plotbot/image.hpp"
#include "plotbot/plotemit.hpp"
#include "plotbot/stylenet.hpp"

// End-to-end orchestration of the stages behind the CLI subcommands, plus the
// flat key = value config format and the artifact manifest.

namespace plotbot::pipeline {

struct PipelineConfig {
    // [paths]
    std::string photo;
    std::string labels;
    std::string annotations;  // optional
    std::vector<std::string> styles;
    std::string checkpoint;
    std::string out_dir = "out";
    std::string train_contents;  // directory of content PNGs
    std::string train_labels;    // directory of matching label PNGs

    // [train]
    style::TrainConfig train;
    int mask_radius = -1;  // -1 = proportional default (3 px at 512)

    // [workspace]
    plot::WorkspaceConfig workspace;

    // [stages]
    bool stage_sparsity = true;
    bool stage_fusion = true;
    bool stage_fills = true;
    int pen_thickness = 1;
    float binarize_threshold = 0.5f;
};

// Flat sections of key = value lines; '#' and ';' start comments.
// Environment variables PLOTBOT_PHOTO, PLOTBOT_LABELS, PLOTBOT_CHECKPOINT and
// PLOTBOT_OUT override the corresponding paths only.
PipelineConfig load_config(const std::string& path);

std::string sha256_file(const std::string& path);

struct StageToggles {
    bool no_sparsity = false;
    bool no_fusion = false;
    bool no_fills = false;
};

// Subcommands. Each throws ConfigError (exit 2) or DataError (exit 3) on the
// corresponding failure class.
void cmd_train(const PipelineConfig& cfg);
void cmd_sketch(const PipelineConfig& cfg);
void cmd_plot(const PipelineConfig& cfg);
void cmd_run(const PipelineConfig& cfg);

// Deterministic synthetic portrait fixture: photo, label map, annotations,
// eyebrow patches, style sketches, a small training set, and a ready config.
void write_fixture(const std::string& dir, int size, int train_count,
                   uint64_t seed);

}  // namespace plotbot::pipeline
