#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "semidec/commands.h"

namespace {

void add_scene_options(CLI::App* cmd, semidec::SceneCfg& scene) {
    cmd->add_option("--frames", scene.frames, "frames per clip");
    cmd->add_option("--size", scene.size, "frame height and width");
    cmd->add_option("--background-contrast", scene.background_contrast, "background pattern contrast");
    cmd->add_option("--lip-gain", scene.lip_gain, "audio energy to mouth opening gain");
    cmd->add_option("--exp-lambda", scene.exp_lambda, "expression low-pass coefficient");
    cmd->add_option("--pose-amplitude", scene.pose_amplitude, "head sway amplitude in pixels");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-decoupled audio attention for talking-face diffusion on synthetic clips"};
    app.require_subcommand(1);

    int n = 200;
    std::uint64_t seed = 0;
    std::string out;
    semidec::SceneCfg scene;
    auto* make_data = app.add_subcommand("make-data", "render a synthetic talking-face dataset");
    make_data->add_option("--n", n, "number of clips")->check(CLI::PositiveNumber);
    make_data->add_option("--seed", seed, "base seed")->required();
    make_data->add_option("--out", out, "output directory")->required();
    add_scene_options(make_data, scene);

    std::string config;
    auto* train = app.add_subcommand("train", "train a denoiser from a config file");
    train->add_option("--config", config, "INI config")->required();

    semidec::SampleRequest req;
    std::string checkpoint, embedding, wav, pgm_dir;
    std::uint64_t audio_seed = 0, sample_seed = 0;
    auto* sample = app.add_subcommand("sample", "generate a clip from a checkpoint and audio");
    sample->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    auto* audio_seed_opt = sample->add_option("--audio-seed", audio_seed, "synthetic audio clip seed");
    auto* embedding_opt = sample->add_option("--embedding", embedding, "SDTF file holding an 'audio' tensor");
    auto* wav_opt = sample->add_option("--wav", wav, "PCM16 mono WAV");
    auto* sample_seed_opt = sample->add_option("--seed", sample_seed, "noise seed");
    sample->add_option("--out", out, "output SDTF")->required();
    auto* pgm_opt = sample->add_option("--pgm-dir", pgm_dir, "also write frames as PGM images");

    std::string videos, masks = "default";
    auto* eval = app.add_subcommand("eval", "score generated or synthetic clips");
    eval->add_option("--videos", videos, "directory of clip SDTF files")->required();
    eval->add_option("--masks", masks, "masks SDTF or 'default'");
    eval->add_option("--out", out, "metrics CSV")->required();

    auto* bench = app.add_subcommand("bench", "time both adapters on one single-threaded config");
    bench->add_option("--config", config, "INI config")->required();
    bench->add_option("--out", out, "JSON report")->required();

    auto* flops = app.add_subcommand("flops", "analytic multiply-accumulate counts");
    flops->add_option("--config", config, "INI config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*make_data) {
            semidec::cmd_make_data(n, seed, out, scene, std::cout);
        } else if (*train) {
            semidec::cmd_train(std::filesystem::path(config), std::cout);
        } else if (*sample) {
            req.checkpoint = checkpoint;
            if (*audio_seed_opt) req.audio_seed = audio_seed;
            if (*embedding_opt) req.embedding = embedding;
            if (*wav_opt) req.wav = wav;
            if (*sample_seed_opt) req.sample_seed = sample_seed;
            if (*pgm_opt) req.pgm_dir = pgm_dir;
            req.out = out;
            semidec::cmd_sample(req, std::cout);
        } else if (*eval) {
            semidec::cmd_eval(videos, masks, out, std::cout);
        } else if (*bench) {
            semidec::cmd_bench(config, out, std::cout);
        } else if (*flops) {
            semidec::cmd_flops(config, std::cout);
        }
    } catch (const semidec::Error& e) {
        std::cerr << "error: " << semidec::to_string(e.code()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
