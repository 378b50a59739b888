#include "semidec/synthetic_faces.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace semidec {
namespace {

double overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Blends an axis-aligned rectangle into the frame using exact area coverage,
// so the mean over any region fully containing it is linear in its area.
void paint_rect(Latent& frame, double x0, double x1, double y0, double y1, double level) {
    const Index ylo = std::max<Index>(0, static_cast<Index>(std::floor(y0)));
    const Index yhi = std::min<Index>(frame.height, static_cast<Index>(std::ceil(y1)));
    const Index xlo = std::max<Index>(0, static_cast<Index>(std::floor(x0)));
    const Index xhi = std::min<Index>(frame.width, static_cast<Index>(std::ceil(x1)));
    for (Index y = ylo; y < yhi; ++y) {
        const double cy = overlap(static_cast<double>(y), y + 1.0, y0, y1);
        for (Index x = xlo; x < xhi; ++x) {
            const double cover = cy * overlap(static_cast<double>(x), x + 1.0, x0, x1);
            double& px = frame.at(0, y, x);
            px = (1.0 - cover) * px + cover * level;
        }
    }
}

std::vector<double> syllable_energy(const SceneCfg& cfg, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> length(2, 4);
    std::uniform_real_distribution<double> level(cfg.energy_min, 1.0);
    std::bernoulli_distribution pause(cfg.pause_probability);
    std::vector<double> e;
    while (static_cast<int>(e.size()) < cfg.frames) {
        const int len = length(rng);
        const double v = pause(rng) ? cfg.energy_min : level(rng);
        for (int i = 0; i < len && static_cast<int>(e.size()) < cfg.frames; ++i) e.push_back(v);
    }
    return e;
}

}  // namespace

void SceneCfg::validate() const {
    require(frames >= 1 && size >= 8, ErrorCode::config, "scene needs >= 1 frame and size >= 8");
    require(background_contrast >= 0.0 && lip_gain >= 0.0 && lip_min_height >= 0.0 && pose_amplitude >= 0.0 &&
                audio_noise >= 0.0 && lip_width > 0.0 && face_radius > 0.0,
            ErrorCode::config, "scene gains must be non-negative");
    require(exp_lambda >= 0.0 && exp_lambda < 1.0, ErrorCode::config, "exp_lambda must lie in [0, 1)");
    require(pose_period > 0.0, ErrorCode::config, "pose_period must be positive");
    require(energy_min >= 0.0 && energy_min <= 1.0 && pause_probability >= 0.0 && pause_probability <= 1.0,
            ErrorCode::config, "energy_min and pause_probability must lie in [0, 1]");
    require(audio_peak > 0.0 && audio_peak + audio_noise <= 1.0, ErrorCode::config,
            "audio_peak + audio_noise must not exceed 1");
    require(background_level - 0.5 * background_contrast >= 0.0 && background_level + 0.5 * background_contrast <= 1.0,
            ErrorCode::config, "background levels must stay in [0, 1]");
    for (double v : {face_level, lip_level, exp_init}) {
        require(v >= 0.0 && v <= 1.0, ErrorCode::config, "scene intensities must lie in [0, 1]");
    }
    require(sample_rate > 0 && frames_per_second > 0 && sample_rate % frames_per_second == 0, ErrorCode::config,
            "sample_rate must be a positive multiple of frames_per_second");
}

std::string SceneCfg::digest_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "frames=" << frames << ";size=" << size << ";background_contrast=" << background_contrast
       << ";background_level=" << background_level << ";face_level=" << face_level
       << ";face_radius=" << face_radius << ";lip_level=" << lip_level << ";lip_min_height=" << lip_min_height
       << ";lip_gain=" << lip_gain << ";lip_width=" << lip_width << ";exp_lambda=" << exp_lambda
       << ";exp_init=" << exp_init << ";pose_amplitude=" << pose_amplitude << ";pose_period=" << pose_period
       << ";energy_min=" << energy_min << ";pause_probability=" << pause_probability
       << ";audio_peak=" << audio_peak << ";audio_noise=" << audio_noise << ";sample_rate=" << sample_rate
       << ";frames_per_second=" << frames_per_second;
    return os.str();
}

double pose_offset(const SceneCfg& cfg, int t) {
    return cfg.pose_amplitude * std::sin(2.0 * std::numbers::pi * t / cfg.pose_period);
}

VideoSample render_video(const SceneCfg& cfg, const std::vector<double>& lip_energy, std::uint64_t seed) {
    cfg.validate();
    require(static_cast<int>(lip_energy.size()) == cfg.frames, ErrorCode::invalid_argument,
            "need one energy value per frame");
    for (double e : lip_energy) {
        require(e >= 0.0 && e <= 1.0, ErrorCode::invalid_argument, "lip energy must lie in [0, 1]");
    }

    std::mt19937_64 rng(seed ^ 0x5EEDFACEULL);
    std::uniform_int_distribution<int> phase(0, 3);
    const int phase_x = phase(rng);
    const int phase_y = phase(rng);
    const std::uint64_t audio_seed = rng();

    const double s = cfg.size / 32.0;
    const double lo = cfg.background_level - 0.5 * cfg.background_contrast;
    const double hi = cfg.background_level + 0.5 * cfg.background_contrast;
    const double radius = cfg.face_radius * s;
    const double cy = cfg.size * (17.0 / 32.0);

    VideoSample v;
    v.seed = seed;
    v.drivers.lip_energy = lip_energy;
    double x_prev = cfg.exp_init;
    for (int t = 0; t < cfg.frames; ++t) {
        const double e = lip_energy[static_cast<std::size_t>(t)];
        const double o = pose_offset(cfg, t);
        const double x = cfg.exp_lambda * x_prev + (1.0 - cfg.exp_lambda) * e;
        x_prev = x;
        v.drivers.exp_level.push_back(x);
        v.drivers.pose_offset.push_back(o);

        const double cx = 0.5 * cfg.size + o * s;
        Latent frame(1, cfg.size, cfg.size);
        for (Index py = 0; py < cfg.size; ++py) {
            for (Index px = 0; px < cfg.size; ++px) {
                const bool dark = (((px + phase_x) / 4) + ((py + phase_y) / 4)) % 2 == 0;
                int inside = 0;
                for (int sy = 0; sy < 4; ++sy) {
                    for (int sx = 0; sx < 4; ++sx) {
                        const double dx = px + (sx + 0.5) / 4.0 - cx;
                        const double dy = py + (sy + 0.5) / 4.0 - cy;
                        inside += dx * dx + dy * dy <= radius * radius ? 1 : 0;
                    }
                }
                const double cover = inside / 16.0;
                frame.at(0, py, px) = (1.0 - cover) * (dark ? lo : hi) + cover * cfg.face_level;
            }
        }

        const double eye_level = 0.15 + 0.8 * x;
        const double eye_y0 = 9.0 * s;
        const double eye_y1 = 12.0 * s;
        paint_rect(frame, cx - 6.0 * s, cx - 3.0 * s, eye_y0, eye_y1, eye_level);
        paint_rect(frame, cx + 3.0 * s, cx + 6.0 * s, eye_y0, eye_y1, eye_level);

        const double lip_h = (cfg.lip_min_height + cfg.lip_gain * e) * s;
        const double lip_cy = 24.0 * s;
        const double half_w = 0.5 * cfg.lip_width * s;
        paint_rect(frame, cx - half_w, cx + half_w, lip_cy - 0.5 * lip_h, lip_cy + 0.5 * lip_h, cfg.lip_level);

        frame.data = frame.data.cwiseMax(0.0).cwiseMin(1.0);
        v.frames.push_back(std::move(frame));
    }

    AudioSpec spec;
    spec.sample_rate = cfg.sample_rate;
    spec.frames_per_second = cfg.frames_per_second;
    spec.duration_s = static_cast<double>(cfg.frames) / cfg.frames_per_second;
    FeaturizerCfg feat;
    feat.window = cfg.sample_rate / cfg.frames_per_second;
    const double tone_hz = static_cast<double>(band_center_index(feat, 0)) * cfg.sample_rate / feat.window;
    spec.tones.push_back({tone_hz, 1.0});
    for (double e : lip_energy) spec.frame_gains.push_back(cfg.audio_peak * std::sqrt(e));
    spec.noise_level = cfg.audio_noise;
    v.audio = embed_audio(synth_audio(spec, audio_seed), feat);
    return v;
}

VideoSample gen_video_sample(std::uint64_t seed, const SceneCfg& cfg) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    return render_video(cfg, syllable_energy(cfg, rng), seed);
}

std::vector<VideoSample> make_dataset(int n, std::uint64_t seed, const SceneCfg& cfg) {
    require(n >= 1, ErrorCode::invalid_argument, "dataset size must be >= 1");
    std::vector<VideoSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(gen_video_sample(seed + static_cast<std::uint64_t>(i), cfg));
    return out;
}

TensorFile video_to_tensor_file(const VideoSample& v) {
    require(!v.frames.empty(), ErrorCode::invalid_argument, "video has no frames");
    const auto& f0 = v.frames.front();
    const auto n = static_cast<std::uint32_t>(v.frames.size());
    Tensor frames{"frames",
                  {n, static_cast<std::uint32_t>(f0.channels()), static_cast<std::uint32_t>(f0.height),
                   static_cast<std::uint32_t>(f0.width)},
                  DType::f64,
                  {}};
    for (const auto& f : v.frames) {
        require(f.same_shape(f0), ErrorCode::shape_mismatch, "video frames differ in shape");
        for (Index c = 0; c < f.channels(); ++c) {
            for (Index p = 0; p < f.pixels(); ++p) frames.values.push_back(f.data(c, p));
        }
    }
    TensorFile file;
    file.add(std::move(frames));
    if (v.audio.tokens.size() > 0) file.add(matrix_to_tensor("audio", v.audio.tokens));
    auto add_vec = [&file, n](const char* name, const std::vector<double>& values) {
        if (values.empty()) return;
        require(values.size() == n, ErrorCode::shape_mismatch, std::string(name) + " length differs from frame count");
        file.add(Tensor{name, {n}, DType::f64, values});
    };
    add_vec("lip_energy", v.drivers.lip_energy);
    add_vec("exp_level", v.drivers.exp_level);
    add_vec("pose_offset", v.drivers.pose_offset);
    file.set_tag("seed", std::to_string(v.seed));
    return file;
}

VideoSample video_from_tensor_file(const TensorFile& file) {
    const auto& frames = file.get("frames");
    require(frames.dims.size() == 4 && frames.dims[0] >= 1, ErrorCode::shape_mismatch,
            "frames tensor must be [N x C x H x W]");
    const Index n = frames.dims[0], c = frames.dims[1], h = frames.dims[2], w = frames.dims[3];
    VideoSample v;
    if (auto seed = file.tag("seed")) v.seed = std::stoull(*seed);
    std::size_t k = 0;
    for (Index i = 0; i < n; ++i) {
        Latent f(c, h, w);
        for (Index ch = 0; ch < c; ++ch) {
            for (Index p = 0; p < h * w; ++p) f.data(ch, p) = frames.values[k++];
        }
        v.frames.push_back(std::move(f));
    }
    if (file.contains("audio")) {
        const auto& a = file.get("audio");
        require(a.dims.size() == 2, ErrorCode::shape_mismatch, "audio tensor must be rank 2");
        v.audio.tokens = tensor_to_matrix(a, a.dims[0], a.dims[1]);
    }
    auto read_vec = [&](const char* name, std::vector<double>& out) {
        if (file.contains(name)) out = file.get(name).values;
    };
    read_vec("lip_energy", v.drivers.lip_energy);
    read_vec("exp_level", v.drivers.exp_level);
    read_vec("pose_offset", v.drivers.pose_offset);
    return v;
}

Latent pixels_to_latent(const Latent& pixels) {
    Latent z = pixels;
    z.data = pixels.data.array() * 2.0 - 1.0;
    return z;
}

Latent latent_to_pixels(const Latent& latent) {
    Latent p = latent;
    p.data = ((latent.data.array() + 1.0) * 0.5).cwiseMax(0.0).cwiseMin(1.0);
    return p;
}

std::vector<TrainExample> to_train_examples(const std::vector<VideoSample>& samples, int context_radius) {
    std::vector<TrainExample> out;
    for (const auto& v : samples) {
        require(static_cast<Index>(v.frames.size()) == v.audio.frames(), ErrorCode::shape_mismatch,
                "video frame count does not match audio token count");
        for (std::size_t t = 0; t < v.frames.size(); ++t) {
            out.push_back({pixels_to_latent(v.frames[t]), audio_context(v.audio, static_cast<Index>(t), context_radius)});
        }
    }
    return out;
}

}  // namespace semidec
