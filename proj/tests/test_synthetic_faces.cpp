#include <cmath>
#include <numbers>

#include "semidec/adapters.h"
#include "semidec/metrics.h"
#include "semidec/synthetic_faces.h"
#include "test_util.h"

using namespace semidec;

namespace {

bool same_video(const VideoSample& a, const VideoSample& b) {
    if (a.frames.size() != b.frames.size() || a.audio.tokens != b.audio.tokens) return false;
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
        if (a.frames[t].data != b.frames[t].data) return false;
    }
    return a.drivers.lip_energy == b.drivers.lip_energy;
}

}  // namespace

TEST(SyntheticFaces, LipMaskMeanIsExactlyLinearInEnergy) {
    // The face covers the whole lip mask, so the mask mean is the face level
    // plus the painted mouth area times the contrast, over 8 x 13 pixels.
    const SceneCfg cfg;
    const RegionMasks m = make_default_masks(cfg.size, cfg.size);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const VideoSample v = gen_video_sample(seed, cfg);
        const auto lip = masked_means(v.frames, m.lip);
        for (int t = 0; t < cfg.frames; ++t) {
            const double e = v.drivers.lip_energy[t];
            const double area = cfg.lip_width * (cfg.lip_min_height + cfg.lip_gain * e);
            EXPECT_NEAR(lip[t], cfg.face_level + (cfg.lip_level - cfg.face_level) * area / 104.0, 1e-12);
        }
    }
}

TEST(SyntheticFaces, GroundTruthRecoverable) {
    const SceneCfg cfg;
    const RegionMasks m = make_default_masks(cfg.size, cfg.size);
    std::vector<double> lip, energy;
    for (const auto& v : make_dataset(100, 500, cfg)) {
        const auto l = masked_means(v.frames, m.lip);
        lip.insert(lip.end(), l.begin(), l.end());
        energy.insert(energy.end(), v.drivers.lip_energy.begin(), v.drivers.lip_energy.end());
    }
    EXPECT_GE(pearson(lip, energy), 0.99);
}

TEST(SyntheticFaces, PoseUncorrelatedWithEnergy) {
    const SceneCfg cfg;
    std::vector<double> pose, energy;
    for (const auto& v : make_dataset(100, 700, cfg)) {
        pose.insert(pose.end(), v.drivers.pose_offset.begin(), v.drivers.pose_offset.end());
        energy.insert(energy.end(), v.drivers.lip_energy.begin(), v.drivers.lip_energy.end());
    }
    EXPECT_LE(std::abs(pearson(pose, energy)), 0.3);
}

TEST(SyntheticFaces, PoseOffsetFormula) {
    const SceneCfg cfg;
    const VideoSample v = gen_video_sample(3, cfg);
    for (int t = 0; t < 16; ++t) {
        EXPECT_EQ(v.drivers.pose_offset[t], 3.0 * std::sin(2.0 * std::numbers::pi * t / 16.0));
        EXPECT_EQ(pose_offset(cfg, t), v.drivers.pose_offset[t]);
    }
}

TEST(SyntheticFaces, ExpressionIsLowPassedEnergy) {
    const SceneCfg cfg;
    const VideoSample v = gen_video_sample(4, cfg);
    double x = cfg.exp_init;
    for (int t = 0; t < 16; ++t) {
        x = 0.6 * x + 0.4 * v.drivers.lip_energy[t];
        EXPECT_NEAR(v.drivers.exp_level[t], x, 1e-15);
    }
}

TEST(SyntheticFaces, ZeroEnergyHoldsMinimumMouth) {
    const SceneCfg cfg;
    const RegionMasks m = make_default_masks(cfg.size, cfg.size);
    const VideoSample v = render_video(cfg, std::vector<double>(16, 0.0), 9);
    const auto lip = masked_means(v.frames, m.lip);
    const double floor_mean = cfg.face_level + (cfg.lip_level - cfg.face_level) * cfg.lip_width * cfg.lip_min_height / 104.0;
    for (int t = 0; t < 16; ++t) {
        EXPECT_NEAR(lip[t], floor_mean, 1e-12);
        EXPECT_NEAR(v.drivers.exp_level[t], cfg.exp_init * std::pow(cfg.exp_lambda, t + 1), 1e-15);
    }
}

TEST(SyntheticFaces, DeterministicAndDistinct) {
    const SceneCfg cfg;
    EXPECT_TRUE(same_video(gen_video_sample(42, cfg), gen_video_sample(42, cfg)));
    const auto set = make_dataset(100, 10000, cfg);
    EXPECT_TRUE(same_video(make_dataset(1, 10000, cfg)[0], gen_video_sample(10000, cfg)));
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = i + 1; j < set.size(); ++j) ASSERT_FALSE(same_video(set[i], set[j])) << i << " " << j;
    }
}

TEST(SyntheticFaces, ShapesAndPixelRange) {
    SceneCfg cfg;
    for (double contrast : {0.0, 0.3, 0.7}) {
        cfg.background_contrast = contrast;
        cfg.lip_gain = 6.0;
        const VideoSample v = gen_video_sample(1, cfg);
        ASSERT_EQ(v.frames.size(), 16u);
        EXPECT_EQ(v.audio.frames(), 16);
        EXPECT_EQ(v.audio.dim(), 10);
        for (const auto& f : v.frames) {
            EXPECT_EQ(f.channels(), 1);
            EXPECT_EQ(f.height, 32);
            EXPECT_GE(f.data.minCoeff(), 0.0);
            EXPECT_LE(f.data.maxCoeff(), 1.0);
        }
    }
}

TEST(SyntheticFaces, AudioCarriesTheEnergy) {
    const SceneCfg cfg;
    std::vector<double> power, energy;
    for (const auto& v : make_dataset(20, 1, cfg)) {
        for (int t = 0; t < 16; ++t) {
            power.push_back(std::exp(v.audio.tokens(t, 0)));
            energy.push_back(v.drivers.lip_energy[t]);
        }
    }
    EXPECT_GE(pearson(power, energy), 0.99);
}

TEST(SyntheticFaces, TensorRoundTrip) {
    const VideoSample v = gen_video_sample(77, SceneCfg{});
    const VideoSample w = video_from_tensor_file(decode_tensor_file(encode_tensor_file(video_to_tensor_file(v))));
    EXPECT_TRUE(same_video(v, w));
    EXPECT_EQ(w.seed, 77u);
    EXPECT_EQ(w.drivers.exp_level, v.drivers.exp_level);
    EXPECT_EQ(w.drivers.pose_offset, v.drivers.pose_offset);
}

TEST(SyntheticFaces, InvalidConfigsRejected) {
    SceneCfg cfg;
    cfg.exp_lambda = 1.0;
    EXPECT_SEMIDEC_ERROR(gen_video_sample(0, cfg), ErrorCode::config);
    cfg = SceneCfg{};
    cfg.lip_gain = -1.0;
    EXPECT_SEMIDEC_ERROR(gen_video_sample(0, cfg), ErrorCode::config);
    EXPECT_SEMIDEC_ERROR(render_video(SceneCfg{}, std::vector<double>(15, 0.0), 0), ErrorCode::invalid_argument);
    EXPECT_SEMIDEC_ERROR(make_dataset(0, 0, SceneCfg{}), ErrorCode::invalid_argument);
}

TEST(SyntheticFaces, LatentMappingRoundTrip) {
    const VideoSample v = gen_video_sample(5, SceneCfg{});
    for (const auto& f : v.frames) {
        const Latent z = pixels_to_latent(f);
        EXPECT_GE(z.data.minCoeff(), -1.0);
        EXPECT_LE(z.data.maxCoeff(), 1.0);
        EXPECT_LE((latent_to_pixels(z).data - f.data).cwiseAbs().maxCoeff(), 1e-15);
    }
}
