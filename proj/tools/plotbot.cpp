#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "plotbot/pipeline.hpp"

// CLI front end. Exit codes: 0 ok, 2 configuration problem, 3 bad data,
// 1 anything else.

using plotbot::pipeline::PipelineConfig;

namespace {

struct CommonOpts {
    std::string config = "config.ini";
    std::string out;
    int64_t seed = -1;
    bool no_sparsity = false;
    bool no_fusion = false;
    bool no_fills = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config, "Path to config file");
    sub->add_option("--out", o.out, "Override output directory");
    sub->add_option("--seed", o.seed, "Override training seed");
    sub->add_flag("--no-sparsity", o.no_sparsity, "Disable the sparsity loss");
    sub->add_flag("--no-fusion", o.no_fusion, "Disable detail fusion");
    sub->add_flag("--no-fills", o.no_fills, "Disable solid fill planning");
}

PipelineConfig resolve(const CommonOpts& o) {
    PipelineConfig cfg = plotbot::pipeline::load_config(o.config);
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.seed >= 0) cfg.train.seed = static_cast<uint64_t>(o.seed);
    if (o.no_sparsity) cfg.stage_sparsity = false;
    if (o.no_fusion) cfg.stage_fusion = false;
    if (o.no_fills) cfg.stage_fills = false;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"portrait sketch synthesis and pen-plotter path planning"};
    app.require_subcommand(1);

    CommonOpts train_o, sketch_o, plot_o, run_o;
    auto* train = app.add_subcommand("train", "Train the sketch model");
    add_common(train, train_o);
    auto* sketch = app.add_subcommand("sketch", "Synthesize and binarize a sketch");
    add_common(sketch, sketch_o);
    auto* plot = app.add_subcommand("plot", "Plan strokes and emit machine code");
    add_common(plot, plot_o);
    auto* run = app.add_subcommand("run", "Full photo-to-plot pipeline");
    add_common(run, run_o);

    std::string fix_dir = "fixture";
    int fix_size = 64, fix_train = 4;
    uint64_t fix_seed = 7;
    auto* fixture = app.add_subcommand("fixture", "Write a synthetic test fixture");
    fixture->add_option("--dir", fix_dir, "Output directory");
    fixture->add_option("--size", fix_size, "Portrait size in pixels");
    fixture->add_option("--train-count", fix_train, "Training images to generate");
    fixture->add_option("--seed", fix_seed, "Fixture seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) plotbot::pipeline::cmd_train(resolve(train_o));
        else if (sketch->parsed()) plotbot::pipeline::cmd_sketch(resolve(sketch_o));
        else if (plot->parsed()) plotbot::pipeline::cmd_plot(resolve(plot_o));
        else if (run->parsed()) plotbot::pipeline::cmd_run(resolve(run_o));
        else if (fixture->parsed())
            plotbot::pipeline::write_fixture(fix_dir, fix_size, fix_train, fix_seed);
    } catch (const plotbot::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const plotbot::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
