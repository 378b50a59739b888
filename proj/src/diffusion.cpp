#include "semidec/diffusion.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace semidec {
namespace {

Mat silu(const Mat& u) { return (u.array() / (1.0 + (-u.array()).exp())).matrix(); }

Mat silu_grad(const Mat& u) {
    const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-u.array()).exp());
    return (sig * (1.0 + u.array() * (1.0 - sig))).matrix();
}

// Independent per-step stream so the batch draw does not depend on how many
// normals earlier steps consumed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Latent gaussian_like(const Latent& shape, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Latent out(shape.channels(), shape.height, shape.width);
    for (Index p = 0; p < out.pixels(); ++p) {
        for (Index c = 0; c < out.channels(); ++c) out.data(c, p) = n01(rng);
    }
    return out;
}

struct BatchDraw {
    std::vector<int> t;
    std::vector<Latent> eps;
};

BatchDraw draw_noise(std::span<const TrainExample> batch, const NoiseSchedule& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_t(0, s.timesteps() - 1);
    BatchDraw d;
    for (const auto& ex : batch) {
        d.t.push_back(pick_t(rng));
        d.eps.push_back(gaussian_like(ex.z0, rng));
    }
    return d;
}

void accumulate(DenoiserParams& into, DenoiserParams& from) {
    auto dst = into.params("");
    auto src = from.params("");
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value += *src[i].value;
}

}  // namespace

NoiseSchedule make_schedule(int timesteps, double beta_start, double beta_end) {
    require(timesteps >= 2, ErrorCode::invalid_argument, "schedule needs at least 2 timesteps");
    require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, ErrorCode::invalid_argument,
            "require 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.beta.resize(static_cast<std::size_t>(timesteps));
    s.alpha_bar.resize(static_cast<std::size_t>(timesteps));
    double prod = 1.0;
    for (int t = 0; t < timesteps; ++t) {
        const double beta = beta_start + (beta_end - beta_start) * t / (timesteps - 1);
        prod *= 1.0 - beta;
        s.beta[static_cast<std::size_t>(t)] = beta;
        s.alpha_bar[static_cast<std::size_t>(t)] = prod;
    }
    return s;
}

Latent add_noise(const Latent& z0, int t, const Latent& eps, const NoiseSchedule& s) {
    require(t >= 0 && t < s.timesteps(), ErrorCode::invalid_argument,
            "timestep " + std::to_string(t) + " outside [0, " + std::to_string(s.timesteps()) + ")");
    require_same_shape(z0, eps, "add_noise");
    const double ab = s.alpha_bar[static_cast<std::size_t>(t)];
    Latent out = z0;
    out.data = std::sqrt(ab) * z0.data + std::sqrt(1.0 - ab) * eps.data;
    return out;
}

void DenoiserConfig::validate() const {
    require(latent_channels >= 1 && channels >= 1 && attn_dim >= 1 && audio_dim >= 1 && blocks >= 1,
            ErrorCode::config, "denoiser dims must be positive");
    require(heads >= 1 && attn_dim % heads == 0, ErrorCode::config, "heads must divide attn_dim");
    require(kernel == 1 || kernel == 3, ErrorCode::config, "zero-conv kernel must be 1 or 3");
    require(time_dim >= 2 && time_dim % 2 == 0, ErrorCode::config, "time_dim must be even and >= 2");
    require(output_init_scale >= 0.0, ErrorCode::config, "output_init_scale must be >= 0");
}

ParamList DenoiserBlock::params(const std::string& prefix) {
    ParamList out{{prefix + "mlp_w1", &mlp_w1}, {prefix + "mlp_b1", &mlp_b1}, {prefix + "mlp_w2", &mlp_w2},
                  {prefix + "mlp_b2", &mlp_b2}, {prefix + "time_w", &time_w}, {prefix + "time_b", &time_b}};
    for (auto& np : adapter_params(adapter, prefix + "adapter.")) out.push_back(np);
    return out;
}

DenoiserParams DenoiserParams::init(const DenoiserConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const Index c = cfg.channels;
    DenoiserParams p;
    p.time_dim = cfg.time_dim;
    p.in_w = init_uniform(c, cfg.latent_channels, cfg.latent_channels, rng);
    p.in_b = Mat::Zero(c, 1);
    for (int b = 0; b < cfg.blocks; ++b) {
        DenoiserBlock block;
        block.mlp_w1 = init_uniform(c, c, c, rng);
        block.mlp_b1 = Mat::Zero(c, 1);
        block.mlp_w2 = init_uniform(c, c, c, rng);
        block.mlp_b2 = Mat::Zero(c, 1);
        block.time_w = init_uniform(c, cfg.time_dim, cfg.time_dim, rng);
        block.time_b = Mat::Zero(c, 1);
        if (cfg.kind == AdapterKind::semi) {
            block.adapter = SemiDecoupledParams::init(c, cfg.audio_dim, cfg.attn_dim, cfg.heads, cfg.kernel, rng);
        } else {
            block.adapter = FullyDecoupledParams::init(c, cfg.audio_dim, cfg.attn_dim, cfg.heads, rng);
        }
        p.blocks.push_back(std::move(block));
    }
    p.out_w = init_uniform(cfg.latent_channels, c, c, rng) * cfg.output_init_scale;
    p.out_b = Mat::Zero(cfg.latent_channels, 1);
    return p;
}

AdapterKind DenoiserParams::kind() const {
    require(!blocks.empty(), ErrorCode::invalid_argument, "denoiser has no blocks");
    return kind_of(blocks.front().adapter);
}

ParamList DenoiserParams::params(const std::string& prefix) {
    ParamList out{{prefix + "in_w", &in_w}, {prefix + "in_b", &in_b}};
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (auto& np : blocks[b].params(prefix + "block" + std::to_string(b) + ".")) out.push_back(np);
    }
    out.push_back({prefix + "out_w", &out_w});
    out.push_back({prefix + "out_b", &out_b});
    return out;
}

Eigen::VectorXd timestep_embedding(int t, int dim) {
    const int half = dim / 2;
    Eigen::VectorXd e(dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e(i) = std::sin(t * freq);
        e(half + i) = std::cos(t * freq);
    }
    return e;
}

Latent denoiser_forward(const Latent& z_t, int t, const AudioEmbedding& a, const RegionMasks& m,
                        const DenoiserParams& p, DenoiserTape* tape) {
    require(z_t.channels() == p.latent_channels(), ErrorCode::shape_mismatch,
            "latent channel count does not match the denoiser");
    require(z_t.data.allFinite(), ErrorCode::non_finite, "non-finite denoiser input");

    const Eigen::VectorXd temb = timestep_embedding(t, p.time_dim);
    Latent h(p.channels(), z_t.height, z_t.width);
    h.data = p.in_w * z_t.data;
    h.data.colwise() += p.in_b.col(0);
    if (tape != nullptr) {
        tape->z = z_t;
        tape->temb = temb;
        tape->blocks.resize(p.blocks.size());
    }

    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        const auto& block = p.blocks[b];
        DenoiserBlockTape* bt = tape != nullptr ? &tape->blocks[b] : nullptr;
        Mat pre = block.mlp_w1 * h.data;
        pre.colwise() += block.mlp_b1.col(0);
        Mat act = silu(pre);
        const Eigen::VectorXd shift = block.time_w * temb + block.time_b.col(0) + block.mlp_b2.col(0);
        if (bt != nullptr) bt->h_in = h;
        h.data.noalias() += block.mlp_w2 * act;
        h.data.colwise() += shift;
        if (bt != nullptr) {
            bt->pre_act = std::move(pre);
            bt->act = std::move(act);
            bt->h_mid = h;
        }
        h.data += adapter_forward(block.adapter, h, a, m, bt != nullptr ? &bt->adapter : nullptr).data;
    }

    Latent out(p.latent_channels(), z_t.height, z_t.width);
    out.data = p.out_w * h.data;
    out.data.colwise() += p.out_b.col(0);
    if (tape != nullptr) tape->h_out = std::move(h);
    return out;
}

DenoiserGrads denoiser_backward(const DenoiserParams& p, const DenoiserTape& tape, const RegionMasks& m,
                                const Latent& upstream) {
    require(upstream.same_shape(tape.z), ErrorCode::shape_mismatch, "denoiser upstream gradient shape mismatch");
    DenoiserGrads g;
    DenoiserParams& d = g.d_params;
    d.time_dim = p.time_dim;
    d.blocks.resize(p.blocks.size());

    d.out_w = upstream.data * tape.h_out.data.transpose();
    d.out_b = upstream.data.rowwise().sum();
    Latent dh(p.channels(), upstream.height, upstream.width);
    dh.data = p.out_w.transpose() * upstream.data;
    g.d_audio.setZero(0, 0);

    for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
        const auto& block = p.blocks[bi];
        const auto& bt = tape.blocks[bi];
        auto& db = d.blocks[bi];

        AdapterGrads ag = adapter_backward(block.adapter, bt.adapter, m, dh);
        db.adapter = std::move(ag.d_params);
        dh.data += ag.d_latent.data;
        if (g.d_audio.size() == 0) {
            g.d_audio = std::move(ag.d_audio);
        } else {
            g.d_audio += ag.d_audio;
        }

        const Eigen::VectorXd d_shift = dh.data.rowwise().sum();
        db.mlp_b2 = d_shift;
        db.time_b = d_shift;
        db.time_w = d_shift * tape.temb.transpose();
        db.mlp_w2 = dh.data * bt.act.transpose();
        const Mat d_pre = ((block.mlp_w2.transpose() * dh.data).array() * silu_grad(bt.pre_act).array()).matrix();
        db.mlp_w1 = d_pre * bt.h_in.data.transpose();
        db.mlp_b1 = d_pre.rowwise().sum();
        dh.data.noalias() += block.mlp_w1.transpose() * d_pre;
    }

    d.in_w = dh.data * tape.z.data.transpose();
    d.in_b = dh.data.rowwise().sum();
    g.d_latent = tape.z;
    g.d_latent.data = p.in_w.transpose() * dh.data;
    return g;
}

AudioEmbedding audio_context(const AudioEmbedding& clip, Index frame, int radius) {
    require(clip.frames() >= 1 && radius >= 0, ErrorCode::invalid_argument, "invalid audio context request");
    require(frame >= 0 && frame < clip.frames(), ErrorCode::invalid_argument,
            "frame " + std::to_string(frame) + " outside audio clip of " + std::to_string(clip.frames()));
    AudioEmbedding ctx;
    ctx.tokens.resize(2 * radius + 1, clip.dim());
    for (int k = -radius; k <= radius; ++k) {
        const Index src = std::clamp<Index>(frame + k, 0, clip.frames() - 1);
        ctx.tokens.row(k + radius) = clip.tokens.row(src);
    }
    return ctx;
}

void TrainCfg::validate() const {
    require(learning_rate > 0.0 && batch >= 1 && steps >= 0 && adam_eps > 0.0, ErrorCode::config,
            "training config values must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCode::config,
            "Adam betas must lie in [0, 1)");
}

AdamState AdamState::init(const DenoiserParams& p) { return AdamState{zeros_like(p), zeros_like(p), 0}; }

void adam_update(DenoiserParams& p, DenoiserParams& grad, AdamState& state, const TrainCfg& cfg) {
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto pv = p.params("");
    auto gv = grad.params("");
    auto mv = state.m.params("");
    auto vv = state.v.params("");
    require(pv.size() == gv.size() && pv.size() == mv.size() && pv.size() == vv.size(),
            ErrorCode::shape_mismatch, "optimizer state does not match parameters");
    for (std::size_t i = 0; i < pv.size(); ++i) {
        auto& w = *pv[i].value;
        const auto& gr = *gv[i].value;
        auto& mm = *mv[i].value;
        auto& vm = *vv[i].value;
        mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * gr;
        vm = cfg.beta2 * vm + (1.0 - cfg.beta2) * gr.cwiseProduct(gr);
        w.array() -= cfg.learning_rate * (mm.array() / c1) / ((vm.array() / c2).sqrt() + cfg.adam_eps);
    }
}

double evaluate_loss(std::span<const TrainExample> batch, const RegionMasks& m, const DenoiserParams& p,
                     const NoiseSchedule& s, std::uint64_t seed) {
    require(!batch.empty(), ErrorCode::invalid_argument, "empty training batch");
    const BatchDraw draw = draw_noise(batch, s, seed);
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Latent z_t = add_noise(batch[i].z0, draw.t[i], draw.eps[i], s);
        const Latent pred = denoiser_forward(z_t, draw.t[i], batch[i].context, m, p);
        sum += (pred.data - draw.eps[i].data).squaredNorm();
        count += static_cast<double>(pred.data.size());
    }
    return sum / count;
}

double train_step(std::span<const TrainExample> batch, const RegionMasks& m, DenoiserParams& p,
                  const NoiseSchedule& s, AdamState& opt, const TrainCfg& cfg, std::uint64_t seed) {
    require(!batch.empty(), ErrorCode::invalid_argument, "empty training batch");
    const BatchDraw draw = draw_noise(batch, s, seed);

    double count = 0.0;
    for (const auto& ex : batch) count += static_cast<double>(ex.z0.data.size());

    double sum = 0.0;
    DenoiserParams grad;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        DenoiserTape tape;
        const Latent z_t = add_noise(batch[i].z0, draw.t[i], draw.eps[i], s);
        const Latent pred = denoiser_forward(z_t, draw.t[i], batch[i].context, m, p, &tape);
        Latent residual = pred;
        residual.data -= draw.eps[i].data;
        sum += residual.data.squaredNorm();
        residual.data *= 2.0 / count;
        DenoiserGrads g = denoiser_backward(p, tape, m, residual);
        if (i == 0) {
            grad = std::move(g.d_params);
        } else {
            accumulate(grad, g.d_params);
        }
    }
    const double loss = sum / count;
    require(std::isfinite(loss), ErrorCode::non_finite,
            "non-finite training loss at Adam step " + std::to_string(opt.step + 1));
    adam_update(p, grad, opt, cfg);
    return loss;
}

std::vector<double> train(std::span<const TrainExample> pool, const RegionMasks& m, DenoiserParams& p,
                          const NoiseSchedule& s, const TrainCfg& cfg, const StepCallback& on_step) {
    cfg.validate();
    require(!pool.empty(), ErrorCode::invalid_argument, "empty training pool");
    AdamState opt = AdamState::init(p);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(cfg.steps));
    std::vector<TrainExample> batch(static_cast<std::size_t>(cfg.batch));
    for (int step = 0; step < cfg.steps; ++step) {
        for (auto& ex : batch) ex = pool[pick(rng)];
        const double loss = train_step(batch, m, p, s, opt, cfg, mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
        losses.push_back(loss);
        if (on_step) on_step(step, loss);
    }
    return losses;
}

std::vector<int> ddim_timesteps(int timesteps, int steps) {
    require(steps >= 1 && steps <= timesteps, ErrorCode::invalid_argument,
            "sampling steps must lie in [1, " + std::to_string(timesteps) + "]");
    std::vector<int> ts;
    for (int i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 1.0 : static_cast<double>(steps - 1 - i) / (steps - 1);
        ts.push_back(static_cast<int>(std::lround(frac * (timesteps - 1))));
    }
    return ts;
}

std::vector<Latent> sample(const AudioEmbedding& a, const RegionMasks& m, const DenoiserParams& p,
                           const NoiseSchedule& s, const SampleCfg& cfg) {
    const std::vector<int> ts = ddim_timesteps(s.timesteps(), cfg.steps);
    require(a.frames() >= 1, ErrorCode::invalid_argument, "sampling needs at least one audio token");
    std::mt19937_64 rng(cfg.seed);
    const Latent shape(p.latent_channels(), m.height, m.width);

    std::vector<Latent> frames;
    frames.reserve(static_cast<std::size_t>(a.frames()));
    for (Index f = 0; f < a.frames(); ++f) {
        const AudioEmbedding ctx = audio_context(a, f, cfg.context_radius);
        Latent z = gaussian_like(shape, rng);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const int t = ts[i];
            const double ab = s.alpha_bar[static_cast<std::size_t>(t)];
            const Latent eps = denoiser_forward(z, t, ctx, m, p);
            Mat x0 = ((z.data - std::sqrt(1.0 - ab) * eps.data) / std::sqrt(ab)).cwiseMax(-1.0).cwiseMin(1.0);
            if (i + 1 == ts.size()) {
                z.data = std::move(x0);
                break;
            }
            const Mat eps_clipped = (z.data - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
            const double ab_prev = s.alpha_bar[static_cast<std::size_t>(ts[i + 1])];
            z.data = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps_clipped;
        }
        frames.push_back(std::move(z));
    }
    return frames;
}

}  // namespace semidec
