#include "semidec/audio_features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>

#include "semidec/error.h"
#include "semidec/tensor_file.h"

namespace semidec {

FeaturizerCfg FeaturizerCfg::for_clip(const AudioClip& clip) {
    require(clip.frames_per_second > 0 && clip.sample_rate % clip.frames_per_second == 0,
            ErrorCode::invalid_argument, "sample_rate must be a multiple of frames_per_second");
    FeaturizerCfg cfg;
    cfg.window = clip.sample_rate / clip.frames_per_second;
    return cfg;
}

int band_center_index(const FeaturizerCfg& cfg, int k) {
    const int width = (cfg.window / 2) / cfg.dft_bins;
    return 1 + k * width + width / 2;
}

AudioClip synth_audio(const AudioSpec& spec, std::uint64_t seed) {
    require(spec.duration_s > 0.0, ErrorCode::invalid_argument, "duration must be positive");
    require(spec.sample_rate > 0 && spec.frames_per_second > 0, ErrorCode::invalid_argument,
            "sample_rate and frames_per_second must be positive");
    require(spec.noise_level >= 0.0, ErrorCode::invalid_argument, "noise_level must be >= 0");
    const double nyquist = 0.5 * spec.sample_rate;
    for (const auto& tone : spec.tones) {
        require(tone.frequency_hz > 0.0 && tone.frequency_hz < nyquist, ErrorCode::invalid_argument,
                "tone frequency " + std::to_string(tone.frequency_hz) + " Hz aliases at " +
                    std::to_string(spec.sample_rate) + " Hz");
    }

    const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));
    require(n > 0, ErrorCode::invalid_argument, "duration shorter than one sample");
    const std::size_t window = static_cast<std::size_t>(spec.sample_rate / spec.frames_per_second);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);

    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    clip.frames_per_second = spec.frames_per_second;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double time = static_cast<double>(i) / spec.sample_rate;
        double v = 0.0;
        for (const auto& tone : spec.tones) {
            v += tone.amplitude * std::sin(2.0 * std::numbers::pi * tone.frequency_hz * time);
        }
        const std::size_t frame = i / window;
        if (frame < spec.frame_gains.size()) v *= spec.frame_gains[frame];
        if (spec.noise_level > 0.0) v += spec.noise_level * noise(rng);
        clip.samples[i] = std::clamp(v, -1.0, 1.0);
    }
    return clip;
}

AudioEmbedding embed_audio(const AudioClip& clip, const FeaturizerCfg& cfg) {
    require(cfg.dft_bins >= 1 && cfg.window >= 2 * cfg.dft_bins, ErrorCode::invalid_argument,
            "featurizer window must be at least 2 * dft_bins");
    require(cfg.energy_floor > 0.0, ErrorCode::invalid_argument, "energy_floor must be positive");
    const auto window = static_cast<std::size_t>(cfg.window);
    require(clip.samples.size() >= window, ErrorCode::invalid_argument,
            "clip has " + std::to_string(clip.samples.size()) + " samples, shorter than one window of " +
                std::to_string(window));
    for (double s : clip.samples) {
        require(std::isfinite(s), ErrorCode::non_finite, "non-finite audio sample");
    }

    const auto frames = static_cast<Eigen::Index>(clip.samples.size() / window);
    const int band_width = (cfg.window / 2) / cfg.dft_bins;

    std::vector<double> cos_table(window), sin_table(window);
    for (std::size_t k = 0; k < window; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / cfg.window;
        cos_table[k] = std::cos(angle);
        sin_table[k] = std::sin(angle);
    }

    AudioEmbedding out;
    out.tokens.setZero(frames, cfg.feature_dim());
    double prev_log_energy = 0.0;
    for (Eigen::Index t = 0; t < frames; ++t) {
        const double* x = clip.samples.data() + static_cast<std::size_t>(t) * window;

        double power = 0.0;
        for (std::size_t i = 0; i < window; ++i) power += x[i] * x[i];
        power /= static_cast<double>(window);
        const double log_energy = std::log(power + cfg.energy_floor);
        out.tokens(t, 0) = log_energy;

        for (int band = 0; band < cfg.dft_bins; ++band) {
            double sum_sq = 0.0;
            for (int m = 1 + band * band_width; m <= (band + 1) * band_width; ++m) {
                double re = 0.0, im = 0.0;
                std::size_t phase = 0;
                for (std::size_t i = 0; i < window; ++i) {
                    re += x[i] * cos_table[phase];
                    im -= x[i] * sin_table[phase];
                    phase += static_cast<std::size_t>(m);
                    if (phase >= window) phase -= window;
                }
                const double scale = 2.0 / cfg.window;
                sum_sq += (re * re + im * im) * scale * scale;
            }
            out.tokens(t, 1 + band) = std::sqrt(sum_sq);
        }

        out.tokens(t, cfg.dft_bins + 1) = t == 0 ? 0.0 : log_energy - prev_log_energy;
        prev_log_energy = log_energy;
    }
    return out;
}

void save_embedding(const AudioEmbedding& e, const std::filesystem::path& path) {
    TensorFile file;
    file.add(matrix_to_tensor("audio", e.tokens));
    write_tensor_file(path, file);
}

AudioEmbedding load_embedding(const std::filesystem::path& path) {
    const auto file = read_tensor_file(path);
    const auto& t = file.get("audio");
    require(t.dims.size() == 2 && t.dims[0] >= 1 && t.dims[1] >= 1, ErrorCode::shape_mismatch,
            "audio embedding must be a non-empty rank-2 tensor");
    AudioEmbedding e{tensor_to_matrix(t, t.dims[0], t.dims[1])};
    require(e.tokens.allFinite(), ErrorCode::non_finite, "embedding contains non-finite values");
    return e;
}

namespace {

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t le16(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path, int frames_per_second) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    require(b.size() >= 12 && std::equal(b.begin(), b.begin() + 4, "RIFF") &&
                std::equal(b.begin() + 8, b.begin() + 12, "WAVE"),
            ErrorCode::malformed_header, "not a RIFF/WAVE file");

    AudioClip clip;
    clip.frames_per_second = frames_per_second;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const std::string id(b.begin() + static_cast<std::ptrdiff_t>(pos),
                             b.begin() + static_cast<std::ptrdiff_t>(pos + 4));
        const std::size_t size = le32(b, pos + 4);
        const std::size_t body = pos + 8;
        require(body + size <= b.size(), ErrorCode::truncated_payload, "WAV chunk '" + id + "' truncated");
        if (id == "fmt ") {
            require(size >= 16, ErrorCode::malformed_header, "WAV fmt chunk too short");
            require(le16(b, body) == 1 && le16(b, body + 2) == 1 && le16(b, body + 14) == 16,
                    ErrorCode::malformed_header, "only PCM16 mono WAV is supported");
            clip.sample_rate = static_cast<int>(le32(b, body + 4));
            have_fmt = true;
        } else if (id == "data") {
            require(have_fmt, ErrorCode::malformed_header, "WAV data chunk before fmt chunk");
            clip.samples.reserve(size / 2);
            for (std::size_t i = 0; i + 1 < size; i += 2) {
                const auto raw = static_cast<std::int16_t>(le16(b, body + i));
                clip.samples.push_back(std::max(-1.0, raw / 32768.0));
            }
            return clip;
        }
        pos = body + size + (size & 1);
    }
    fail(ErrorCode::malformed_header, "WAV file has no data chunk");
}

}  // namespace semidec
