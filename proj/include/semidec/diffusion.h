#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semidec/adapters.h"

namespace semidec {

/// Linear-beta DDPM schedule; alpha_bar[t] = prod_{s<=t} (1 - beta[s]).
struct NoiseSchedule {
    std::vector<double> beta;
    std::vector<double> alpha_bar;

    int timesteps() const { return static_cast<int>(beta.size()); }
};

NoiseSchedule make_schedule(int timesteps = 100, double beta_start = 1e-4, double beta_end = 0.02);

/// z_t = sqrt(alpha_bar[t]) z0 + sqrt(1 - alpha_bar[t]) eps
Latent add_noise(const Latent& z0, int t, const Latent& eps, const NoiseSchedule& s);

struct DenoiserConfig {
    AdapterKind kind = AdapterKind::semi;
    Index latent_channels = 1;
    Index channels = 16;
    Index attn_dim = 32;
    int heads = 4;
    Index audio_dim = 10;
    int blocks = 3;
    int kernel = 1;
    int time_dim = 16;
    // Output projection starts at this fraction of the usual uniform bound so
    // the untrained noise prediction is close to zero.
    double output_init_scale = 0.1;

    void validate() const;
};

struct DenoiserBlock {
    Mat mlp_w1, mlp_b1;  // C x C, C x 1
    Mat mlp_w2, mlp_b2;  // C x C, C x 1
    Mat time_w, time_b;  // C x time_dim, C x 1
    AdapterParams adapter;

    ParamList params(const std::string& prefix);
};

struct DenoiserParams {
    Mat in_w, in_b;    // C x latent_channels, C x 1
    std::vector<DenoiserBlock> blocks;
    Mat out_w, out_b;  // latent_channels x C, latent_channels x 1
    int time_dim = 16;

    static DenoiserParams init(const DenoiserConfig& cfg, std::uint64_t seed);

    AdapterKind kind() const;
    Index channels() const { return in_w.rows(); }
    Index latent_channels() const { return in_w.cols(); }
    ParamList params(const std::string& prefix);
};

/// Sinusoidal embedding: [sin(t f_i) | cos(t f_i)], f_i = 10000^(-i/(dim/2)).
Eigen::VectorXd timestep_embedding(int t, int dim);

struct DenoiserBlockTape {
    Latent h_in;
    Mat pre_act;  // W1 h + b1
    Mat act;      // silu(pre_act)
    Latent h_mid;
    AdapterTape adapter;
};

struct DenoiserTape {
    Latent z;
    Eigen::VectorXd temb;
    std::vector<DenoiserBlockTape> blocks;
    Latent h_out;
};

/// Per block: h += mlp(h) + time_proj(t); h += adapter(h, a, m). Returns the
/// predicted noise, same shape as z_t.
Latent denoiser_forward(const Latent& z_t, int t, const AudioEmbedding& a, const RegionMasks& m,
                        const DenoiserParams& p, DenoiserTape* tape = nullptr);

struct DenoiserGrads {
    DenoiserParams d_params;
    Latent d_latent;
    Mat d_audio;
};

DenoiserGrads denoiser_backward(const DenoiserParams& p, const DenoiserTape& tape, const RegionMasks& m,
                                const Latent& upstream);

/// Audio tokens conditioning frame `frame`: the clip's tokens in
/// [frame - radius, frame + radius], indices clamped to the clip.
AudioEmbedding audio_context(const AudioEmbedding& clip, Index frame, int radius);

struct TrainCfg {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch = 8;
    int steps = 2000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdamState {
    DenoiserParams m;
    DenoiserParams v;
    std::int64_t step = 0;

    static AdamState init(const DenoiserParams& p);
};

void adam_update(DenoiserParams& p, DenoiserParams& grad, AdamState& state, const TrainCfg& cfg);

/// One clean frame with the audio context that drives it.
struct TrainExample {
    Latent z0;
    AudioEmbedding context;
};

/// Draws t ~ U{0..T-1} and eps ~ N(0, I) per example from `seed`, computes the
/// mean squared noise-prediction error over the batch and applies one Adam step.
double train_step(std::span<const TrainExample> batch, const RegionMasks& m, DenoiserParams& p,
                  const NoiseSchedule& s, AdamState& opt, const TrainCfg& cfg, std::uint64_t seed);

/// Loss without an update, same sampling as train_step.
double evaluate_loss(std::span<const TrainExample> batch, const RegionMasks& m, const DenoiserParams& p,
                     const NoiseSchedule& s, std::uint64_t seed);

using StepCallback = std::function<void(int step, double loss)>;

/// Runs cfg.steps train_steps, drawing batches uniformly (with replacement)
/// from `pool`. Returns the per-step losses.
std::vector<double> train(std::span<const TrainExample> pool, const RegionMasks& m, DenoiserParams& p,
                          const NoiseSchedule& s, const TrainCfg& cfg, const StepCallback& on_step = {});

/// Descending DDIM timesteps, evenly spaced from T-1 to 0.
std::vector<int> ddim_timesteps(int timesteps, int steps);

struct SampleCfg {
    int steps = 40;
    int context_radius = 1;
    std::uint64_t seed = 0;
};

/// Deterministic DDIM (eta = 0): one latent per audio token, each frame
/// starting from its own seeded Gaussian draw.
std::vector<Latent> sample(const AudioEmbedding& a, const RegionMasks& m, const DenoiserParams& p,
                           const NoiseSchedule& s, const SampleCfg& cfg);

}  // namespace semidec
