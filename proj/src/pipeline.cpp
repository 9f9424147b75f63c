#include "plotbot/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plotbot/maskops.hpp"
#include "plotbot/pathplan.hpp"

namespace fs = std::filesystem;

namespace plotbot::pipeline {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("config: bad boolean for " + key + ": " + v);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::string> list_pngs(const std::string& dir) {
    std::vector<std::string> files;
    if (!fs::is_directory(dir))
        throw ConfigError("config: not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for write: " + path);
    os << text;
}

Image load_binary_sketch(const std::string& path) {
    Image img = read_png_gray(path);
    if (!img.is_binary())
        throw DataError("sketch is not binary: " + path);
    return img;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);

    PipelineConfig cfg;
    std::string section, line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not key = value: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string full = section + "." + key;

        try {
            if (full == "paths.photo") cfg.photo = val;
            else if (full == "paths.labels") cfg.labels = val;
            else if (full == "paths.annotations") cfg.annotations = val;
            else if (full == "paths.styles") cfg.styles = split_list(val);
            else if (full == "paths.checkpoint") cfg.checkpoint = val;
            else if (full == "paths.out") cfg.out_dir = val;
            else if (full == "paths.train_contents") cfg.train_contents = val;
            else if (full == "paths.train_labels") cfg.train_labels = val;
            else if (full == "train.iterations") cfg.train.iterations = std::stoi(val);
            else if (full == "train.batch") cfg.train.batch = std::stoi(val);
            else if (full == "train.lr") cfg.train.lr = std::stof(val);
            else if (full == "train.seed") cfg.train.seed = std::stoull(val);
            else if (full == "train.lambda1") cfg.train.weights.lambda1 = std::stof(val);
            else if (full == "train.lambda2") cfg.train.weights.lambda2 = std::stof(val);
            else if (full == "train.lambda3") cfg.train.weights.lambda3 = std::stof(val);
            else if (full == "train.lambda4") cfg.train.weights.lambda4 = std::stof(val);
            else if (full == "train.mask_radius")
                cfg.mask_radius = val == "auto" ? -1 : std::stoi(val);
            else if (full == "workspace.width_mm") cfg.workspace.width_mm = std::stod(val);
            else if (full == "workspace.height_mm") cfg.workspace.height_mm = std::stod(val);
            else if (full == "workspace.margin_mm") cfg.workspace.margin_mm = std::stod(val);
            else if (full == "workspace.feed_mm_s") cfg.workspace.feed_mm_s = std::stod(val);
            else if (full == "workspace.travel_mm_s") cfg.workspace.travel_mm_s = std::stod(val);
            else if (full == "workspace.pen_lift_s") cfg.workspace.pen_lift_s = std::stod(val);
            else if (full == "stages.sparsity") cfg.stage_sparsity = parse_bool(val, full);
            else if (full == "stages.fusion") cfg.stage_fusion = parse_bool(val, full);
            else if (full == "stages.fills") cfg.stage_fills = parse_bool(val, full);
            else if (full == "stages.pen_thickness") cfg.pen_thickness = std::stoi(val);
            else if (full == "stages.binarize_threshold")
                cfg.binarize_threshold = std::stof(val);
            else
                throw ConfigError("config: unknown key " + full);
        } catch (const std::invalid_argument&) {
            throw ConfigError("config: bad value for " + full + ": " + val);
        }
    }

    // environment variables override paths only
    if (const char* v = std::getenv("PLOTBOT_PHOTO")) cfg.photo = v;
    if (const char* v = std::getenv("PLOTBOT_LABELS")) cfg.labels = v;
    if (const char* v = std::getenv("PLOTBOT_CHECKPOINT")) cfg.checkpoint = v;
    if (const char* v = std::getenv("PLOTBOT_OUT")) cfg.out_dir = v;
    return cfg;
}

std::string sha256_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("sha256: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
        throw DataError("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

void cmd_train(const PipelineConfig& cfg) {
    if (cfg.train_contents.empty() || cfg.train_labels.empty())
        throw ConfigError("train: paths.train_contents and paths.train_labels are required");
    if (cfg.styles.empty())
        throw ConfigError("train: paths.styles must list at least one style image");
    if (cfg.checkpoint.empty())
        throw ConfigError("train: paths.checkpoint is required");

    style::TrainData data;
    const auto contents = list_pngs(cfg.train_contents);
    if (contents.empty())
        throw ConfigError("train: no content images in " + cfg.train_contents);
    for (const auto& cpath : contents) {
        const auto lpath =
            fs::path(cfg.train_labels) / fs::path(cpath).filename();
        if (!fs::exists(lpath))
            throw ConfigError("train: missing label map " + lpath.string());
        const LabelMap labels = read_png_labels(lpath.string());
        Image photo = read_png_gray(cpath);
        photo = masks::remove_background(photo, labels);
        const int r = cfg.mask_radius < 0 ? masks::default_mask_radius(labels.h)
                                          : cfg.mask_radius;
        data.contents.push_back(image_to_tensor(photo));
        data.masks.push_back(
            masks::mask_to_tensor(masks::derive_sparsity_mask(labels, r)));
    }
    for (const auto& spath : cfg.styles)
        data.styles.push_back(image_to_tensor(read_png_gray(spath)));

    style::TrainConfig tc = cfg.train;
    if (!cfg.stage_sparsity) tc.weights.use_sparse = false;

    fs::create_directories(cfg.out_dir);
    if (fs::path(cfg.checkpoint).has_parent_path())
        fs::create_directories(fs::path(cfg.checkpoint).parent_path());
    std::ofstream log(fs::path(cfg.out_dir) / "loss_log.csv");
    const style::Checkpoint ckpt = style::train(tc, data, &log);
    style::save_checkpoint(cfg.checkpoint, ckpt);
}

void cmd_sketch(const PipelineConfig& cfg) {
    if (cfg.photo.empty() || !fs::exists(cfg.photo))
        throw ConfigError("sketch: photo not found: " + cfg.photo);
    if (cfg.checkpoint.empty() || !fs::exists(cfg.checkpoint))
        throw ConfigError("sketch: checkpoint not found: " + cfg.checkpoint);
    if (cfg.styles.empty())
        throw ConfigError("sketch: at least one style image is required");
    const bool have_labels = !cfg.labels.empty() && fs::exists(cfg.labels);
    if (cfg.stage_fusion && !have_labels)
        throw ConfigError("sketch: fusion enabled but label map missing: " +
                          cfg.labels);

    const style::Checkpoint ckpt = style::load_checkpoint(cfg.checkpoint);
    Image photo = read_png_gray(cfg.photo);
    LabelMap labels;
    if (have_labels) {
        labels = read_png_labels(cfg.labels);
        photo = masks::remove_background(photo, labels);
    }
    const nn::Tensor style0 = image_to_tensor(read_png_gray(cfg.styles[0]));
    const Image gray = tensor_to_image(
        style::synthesize(image_to_tensor(photo), style0, ckpt));

    fs::create_directories(cfg.out_dir);
    write_png_gray((fs::path(cfg.out_dir) / "sketch_gray.png").string(), gray);

    // fixed post-processing order: binarize, eyebrow fusion, eyeball renewal,
    // hair fusion
    Image binary = masks::binarize(gray, cfg.binarize_threshold);
    if (cfg.stage_fusion) {
        masks::FaceAnnotations ann;
        if (!cfg.annotations.empty() && fs::exists(cfg.annotations))
            ann = masks::load_annotations(cfg.annotations);
        binary = masks::fuse_eyebrows(binary, ann, labels).sketch;
        binary = masks::renew_eyeballs(binary, ann);
        if (cfg.styles.size() >= 2) {
            const nn::Tensor style1 = image_to_tensor(read_png_gray(cfg.styles[1]));
            const Image hair_gray = tensor_to_image(
                style::synthesize(image_to_tensor(photo), style1, ckpt));
            binary = masks::style_fuse_hair(
                binary, masks::binarize(hair_gray, cfg.binarize_threshold),
                labels);
        }
    }
    write_png_gray((fs::path(cfg.out_dir) / "sketch_binary.png").string(),
                   binary);
}

void cmd_plot(const PipelineConfig& cfg) {
    const auto binary_path = fs::path(cfg.out_dir) / "sketch_binary.png";
    if (!fs::exists(binary_path))
        throw ConfigError("plot: binary sketch not found: " +
                          binary_path.string());
    const Image binary = load_binary_sketch(binary_path.string());
    const auto gray_path = fs::path(cfg.out_dir) / "sketch_gray.png";
    const Image gray =
        fs::exists(gray_path) ? read_png_gray(gray_path.string()) : binary;

    // solid marks go to fill loops; everything else is line-traced, so every
    // ink obligation is covered exactly once
    std::vector<plan::Stroke> fills;
    Image lines = binary;
    if (cfg.stage_fills && !cfg.labels.empty() && fs::exists(cfg.labels)) {
        const LabelMap labels = read_png_labels(cfg.labels);
        const auto fill_mask =
            plan::fill_region_mask(binary, labels, cfg.pen_thickness);
        fills = plan::plan_fills(binary, labels, cfg.pen_thickness);
        for (size_t i = 0; i < fill_mask.size(); ++i)
            if (fill_mask[i]) lines.px[i] = 1.0f;
    }

    const plan::Skeleton skeleton = plan::skeletonize(lines);
    const plan::GradientField grad = plan::canny_gradient(gray);
    std::vector<plan::Stroke> strokes = plan::trace_strokes(skeleton, grad);
    strokes.insert(strokes.end(), fills.begin(), fills.end());
    const plan::Trajectory traj = plan::order_strokes(strokes);

    const plot::PlotProgram prog =
        plot::to_machine(traj, cfg.workspace, binary.w, binary.h);
    fs::create_directories(cfg.out_dir);
    write_text((fs::path(cfg.out_dir) / "plot.gcode").string(),
               plot::emit_gcode(prog));
    write_text((fs::path(cfg.out_dir) / "plot.svg").string(),
               plot::emit_svg(prog));
    {
        std::ofstream os(fs::path(cfg.out_dir) / "trajectory.txt");
        plan::dump_trajectory(os, traj);
    }

    // simulate at one sim pixel per sketch pixel and audit coverage
    const double scale = cfg.workspace.scale_for(binary.w, binary.h);
    const double res = 1.0 / scale;
    const plot::SimResult sim = plot::simulate(prog, res);
    write_png_gray((fs::path(cfg.out_dir) / "sim_raster.png").string(),
                   sim.raster);

    const double ox = (cfg.workspace.width_mm - scale * binary.w) / 2.0;
    const double oy = (cfg.workspace.height_mm - scale * binary.h) / 2.0;
    std::vector<uint8_t> planned(sim.raster.px.size(), 0);
    size_t planned_count = 0;
    auto mark_planned = [&](int x, int y) {
        const double mx = std::round((ox + scale * x) * 1000.0) / 1000.0;
        const double my =
            std::round((cfg.workspace.height_mm - oy - scale * y) * 1000.0) /
            1000.0;
        const int px = std::clamp(
            static_cast<int>(std::lround(mx * res)), 0, sim.raster.w - 1);
        const int py = std::clamp(
            static_cast<int>(std::lround((cfg.workspace.height_mm - my) * res)),
            0, sim.raster.h - 1);
        const size_t i = static_cast<size_t>(py) * sim.raster.w + px;
        if (!planned[i]) {
            planned[i] = 1;
            ++planned_count;
        }
    };
    for (const auto& s : traj.strokes)
        for (const auto& [x, y] : s.points) mark_planned(x, y);

    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < planned.size(); ++i) {
        const bool simmed = sim.raster.px[i] == 0.0f;
        if (planned[i] && simmed) ++inter;
        if (planned[i] || simmed) ++uni;
    }
    const double jaccard = uni == 0 ? 1.0 : static_cast<double>(inter) / uni;

    std::ostringstream rep;
    rep << "strokes " << traj.strokes.size() << "\n";
    rep << "draw_mm " << sim.draw_length_mm << "\n";
    rep << "travel_mm " << sim.travel_length_mm << "\n";
    rep << "pen_up_px " << traj.pen_up_distance << "\n";
    rep << "estimated_s " << sim.time_s << "\n";
    rep << "jaccard " << jaccard << "\n";
    write_text((fs::path(cfg.out_dir) / "plot_report.txt").string(), rep.str());
}

void cmd_run(const PipelineConfig& cfg) {
    // fail fast before writing anything
    if (cfg.photo.empty() || !fs::exists(cfg.photo))
        throw ConfigError("run: photo not found: " + cfg.photo);
    if (cfg.checkpoint.empty() || !fs::exists(cfg.checkpoint))
        throw ConfigError("run: checkpoint not found: " + cfg.checkpoint);

    cmd_sketch(cfg);
    cmd_plot(cfg);

    static const char* kArtifacts[] = {
        "sketch_gray.png", "sketch_binary.png", "plot.gcode", "plot.svg",
        "trajectory.txt",  "sim_raster.png",    "plot_report.txt"};
    std::ostringstream man;
    for (const char* name : kArtifacts) {
        const auto p = fs::path(cfg.out_dir) / name;
        if (fs::exists(p)) man << sha256_file(p.string()) << "  " << name << "\n";
    }
    write_text((fs::path(cfg.out_dir) / "manifest.txt").string(), man.str());
}

}  // namespace plotbot::pipeline
