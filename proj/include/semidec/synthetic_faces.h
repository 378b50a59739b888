#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semidec/audio_features.h"
#include "semidec/diffusion.h"
#include "semidec/tensor_file.h"

namespace semidec {

/// Sprite-face scene. A disk "face" sways horizontally with
/// o_t = pose_amplitude * sin(2 pi t / pose_period), independent of audio.
/// Two eye patches take brightness x_t = lambda x_{t-1} + (1 - lambda) e_t.
/// A bright mouth rectangle has height lip_min_height + lip_gain * e_t, where
/// e_t in [0, 1] is the per-frame audio energy driving the tone amplitude.
struct SceneCfg {
    int frames = 16;
    int size = 32;
    double background_contrast = 0.3;
    double background_level = 0.35;
    double face_level = 0.55;
    double face_radius = 15.0;
    double lip_level = 0.95;
    double lip_min_height = 1.0;
    double lip_gain = 5.0;
    double lip_width = 6.0;
    double exp_lambda = 0.6;
    double exp_init = 0.5;
    double pose_amplitude = 3.0;
    double pose_period = 16.0;
    // Syllable-like energy envelope: levels held for 2..4 frames, with
    // `pause_probability` of a near-silent syllable.
    double energy_min = 0.05;
    double pause_probability = 0.2;
    double audio_peak = 0.8;
    double audio_noise = 0.005;
    int sample_rate = 16000;
    int frames_per_second = 25;

    void validate() const;
    std::string digest_text() const;
};

struct FrameDrivers {
    std::vector<double> lip_energy;   // e_t
    std::vector<double> exp_level;    // x_t
    std::vector<double> pose_offset;  // o_t
};

struct VideoSample {
    std::uint64_t seed = 0;
    std::vector<Latent> frames;  // each 1 x size x size, pixels in [0, 1]
    AudioEmbedding audio;        // frames x D_a
    FrameDrivers drivers;
};

double pose_offset(const SceneCfg& cfg, int t);

/// Renders a clip from explicit per-frame energies (used for fixtures).
VideoSample render_video(const SceneCfg& cfg, const std::vector<double>& lip_energy, std::uint64_t seed);

VideoSample gen_video_sample(std::uint64_t seed, const SceneCfg& cfg);
std::vector<VideoSample> make_dataset(int n, std::uint64_t seed, const SceneCfg& cfg);

TensorFile video_to_tensor_file(const VideoSample& v);
VideoSample video_from_tensor_file(const TensorFile& file);

/// Pixel frames in [0, 1] <-> diffusion latents in [-1, 1].
Latent pixels_to_latent(const Latent& pixels);
Latent latent_to_pixels(const Latent& latent);

/// One TrainExample per frame, with the frame's audio window.
std::vector<TrainExample> to_train_examples(const std::vector<VideoSample>& samples, int context_radius);

}  // namespace semidec
