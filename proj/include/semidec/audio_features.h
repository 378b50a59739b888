#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace semidec {

struct AudioClip {
    std::vector<double> samples;  // each in [-1, 1]
    int sample_rate = 16000;
    int frames_per_second = 25;
};

/// Per-video-frame audio tokens, shape [frames x dim].
struct AudioEmbedding {
    Eigen::MatrixXd tokens;

    Eigen::Index frames() const { return tokens.rows(); }
    Eigen::Index dim() const { return tokens.cols(); }
};

struct Tone {
    double frequency_hz = 440.0;
    double amplitude = 0.5;
};

/// Description of a synthetic clip: a sum of sines, scaled per video frame by
/// `frame_gains` (held constant within each frame window; missing entries
/// default to 1), plus seeded uniform noise of amplitude `noise_level`.
struct AudioSpec {
    double duration_s = 1.0;
    int sample_rate = 16000;
    int frames_per_second = 25;
    std::vector<Tone> tones;
    std::vector<double> frame_gains;
    double noise_level = 0.0;
};

struct FeaturizerCfg {
    int window = 640;  // sample_rate / frames_per_second
    int dft_bins = 8;
    double energy_floor = 1e-8;

    static FeaturizerCfg for_clip(const AudioClip& clip);
    int feature_dim() const { return dft_bins + 2; }
};

AudioClip synth_audio(const AudioSpec& spec, std::uint64_t seed);

/// Token layout: [log(mean power + floor), band magnitudes..., delta log-power].
/// Band k pools DFT indices [1 + k*B, (k+1)*B] with B = (window/2)/dft_bins and
/// reports sqrt(sum |2 X_m / window|^2), i.e. the amplitude of a tone in that band.
AudioEmbedding embed_audio(const AudioClip& clip, const FeaturizerCfg& cfg);

/// Centre DFT index of band `k`, useful for building tones that land on a band.
int band_center_index(const FeaturizerCfg& cfg, int k);

void save_embedding(const AudioEmbedding& e, const std::filesystem::path& path);
AudioEmbedding load_embedding(const std::filesystem::path& path);

/// PCM16 mono little-endian RIFF/WAVE reader.
AudioClip read_wav(const std::filesystem::path& path, int frames_per_second = 25);

}  // namespace semidec
