#include "semidec/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <Eigen/Core>
#include <json.hpp>

#include "semidec/diffusion.h"

namespace semidec {
namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t u(std::int64_t v) { return static_cast<std::uint64_t>(v); }

nlohmann::json flops_json(const FlopReport& r, AdapterKind kind) {
    const auto& a = r.attention;
    const std::uint64_t n_attn = kind == AdapterKind::semi ? 1 : 3;
    return {
        {"unit", "MAC"},
        {"q_proj", n_attn * a.q_proj},
        {"k_proj", n_attn * a.k_proj},
        {"v_proj", n_attn * a.v_proj},
        {"scores", n_attn * a.scores},
        {"weighted_sum", n_attn * a.weighted_sum},
        {"out_proj", n_attn * a.out_proj},
        {"zero_convs", kind == AdapterKind::semi ? r.zero_convs : 0},
        {"total", r.total(kind)},
        {"parameters", kind == AdapterKind::semi ? r.semi_params : r.fully_params},
        {"activation_bytes", r.activation_bytes(kind)},
    };
}

nlohmann::json timing_json(const TimingReport& t) {
    return {{"median_ns", t.median_ns},
            {"p10_ns", t.p10_ns},
            {"p90_ns", t.p90_ns},
            {"runs", t.runs},
            {"single_thread", t.single_thread},
            {"indicative_only", t.indicative_only}};
}

}  // namespace

void FlopCfg::validate() const {
    require(channels >= 1 && attn_dim >= 1 && audio_dim >= 1 && audio_tokens >= 1 && height >= 1 && width >= 1 &&
                heads >= 1 && attn_dim % heads == 0,
            ErrorCode::invalid_argument, "invalid FLOP config: dims must be positive and heads must divide attn_dim");
    require(kernel == 1 || kernel == 3, ErrorCode::invalid_argument, "kernel must be 1 or 3");
}

FlopReport count_flops(const FlopCfg& cfg) {
    cfg.validate();
    const std::uint64_t hw = u(cfg.height) * u(cfg.width);
    FlopReport r;
    r.cfg = cfg;
    r.attention.q_proj = hw * u(cfg.channels) * u(cfg.attn_dim);
    r.attention.k_proj = u(cfg.audio_tokens) * u(cfg.audio_dim) * u(cfg.attn_dim);
    r.attention.v_proj = r.attention.k_proj;
    r.attention.scores = hw * u(cfg.audio_tokens) * u(cfg.attn_dim);
    r.attention.weighted_sum = r.attention.scores;
    r.attention.out_proj = hw * u(cfg.attn_dim) * u(cfg.channels);
    r.zero_convs = 3 * hw * u(cfg.channels) * u(cfg.channels) * u(cfg.kernel) * u(cfg.kernel);
    r.semi_total = r.attention.total() + r.zero_convs;
    r.fully_total = 3 * r.attention.total();
    r.ratio = static_cast<double>(r.fully_total) / static_cast<double>(r.semi_total);

    const std::uint64_t attn_params = 2 * u(cfg.channels) * u(cfg.attn_dim) + 2 * u(cfg.audio_dim) * u(cfg.attn_dim);
    const std::uint64_t conv_params = u(cfg.channels) * u(cfg.channels) * u(cfg.kernel) * u(cfg.kernel) + u(cfg.channels);
    r.semi_params = attn_params + 3 * conv_params;
    r.fully_params = 3 * attn_params;

    const std::uint64_t hwc = hw * u(cfg.channels);
    r.attention_activations = 2 * hw * u(cfg.attn_dim) + 2 * u(cfg.audio_tokens) * u(cfg.attn_dim) +
                              u(cfg.heads) * hw * u(cfg.audio_tokens) + hwc;
    r.semi_activations = r.attention_activations + 3 * hwc * u(cfg.kernel) * u(cfg.kernel) + 3 * hwc;
    r.fully_activations = 3 * r.attention_activations + 3 * hwc;
    return r;
}

void BenchCfg::validate() const {
    require(channels >= 1 && attn_dim >= 1 && audio_dim >= 1 && audio_tokens >= 1 && blocks >= 1,
            ErrorCode::config, "bench dims must be positive");
    require(size >= 8, ErrorCode::config, "bench size must be >= 8 for the default masks");
    require(heads >= 1 && attn_dim % heads == 0, ErrorCode::config, "heads must divide attn_dim");
    require(kernel == 1 || kernel == 3, ErrorCode::config, "kernel must be 1 or 3");
    require(runs >= 30, ErrorCode::config, "timing needs at least 30 runs");
    require(warmup >= 0, ErrorCode::config, "warmup must be >= 0");
}

FlopCfg BenchCfg::flop_cfg() const {
    return FlopCfg{channels, attn_dim, audio_dim, audio_tokens, size, size, heads, kernel};
}

std::string BenchCfg::digest_text() const {
    std::ostringstream os;
    os << "channels=" << channels << ";attn_dim=" << attn_dim << ";audio_dim=" << audio_dim
       << ";audio_tokens=" << audio_tokens << ";size=" << size << ";heads=" << heads << ";blocks=" << blocks
       << ";kernel=" << kernel << ";runs=" << runs << ";warmup=" << warmup << ";single_thread=" << single_thread
       << ";seed=" << seed;
    return os.str();
}

BenchCfg small_bench_cfg() {
    BenchCfg c;
    c.name = "small";
    c.channels = 8;
    c.attn_dim = 16;
    c.audio_tokens = 4;
    c.size = 8;
    return c;
}

BenchCfg medium_bench_cfg() {
    BenchCfg c;
    c.name = "medium";
    c.channels = 32;
    c.attn_dim = 64;
    c.size = 16;
    return c;
}

BenchCfg desk_bench_cfg() { return BenchCfg{}; }

double percentile(std::vector<double> values, double q) {
    require(!values.empty() && q >= 0.0 && q <= 1.0, ErrorCode::invalid_argument, "invalid percentile request");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double clock_granularity_ns() {
    double best = 1e18;
    for (int i = 0; i < 64; ++i) {
        const auto t0 = Clock::now();
        auto t1 = Clock::now();
        while (t1 == t0) t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    return best;
}

TimingReport time_inference(const BenchCfg& cfg, AdapterKind kind) {
    cfg.validate();
    if (cfg.single_thread) Eigen::setNbThreads(1);

    DenoiserConfig dc;
    dc.kind = kind;
    dc.channels = cfg.channels;
    dc.attn_dim = cfg.attn_dim;
    dc.heads = cfg.heads;
    dc.audio_dim = cfg.audio_dim;
    dc.blocks = cfg.blocks;
    dc.kernel = cfg.kernel;
    const DenoiserParams params = DenoiserParams::init(dc, cfg.seed);
    const RegionMasks masks = make_default_masks(cfg.size, cfg.size);

    std::mt19937_64 rng(cfg.seed + 1);
    std::normal_distribution<double> n01(0.0, 1.0);
    Latent z(1, cfg.size, cfg.size);
    for (Index i = 0; i < z.data.size(); ++i) z.data(i) = n01(rng);
    AudioEmbedding audio{Mat(cfg.audio_tokens, cfg.audio_dim)};
    for (Index i = 0; i < audio.tokens.size(); ++i) audio.tokens(i) = n01(rng);
    const int t = 50;

    double sink = 0.0;
    for (int i = 0; i < cfg.warmup; ++i) sink += denoiser_forward(z, t, audio, masks, params).data(0, 0);

    TimingReport r;
    r.runs = cfg.runs;
    r.single_thread = cfg.single_thread;
    r.indicative_only = !cfg.single_thread;
    r.samples_ns.reserve(static_cast<std::size_t>(cfg.runs));
    for (int i = 0; i < cfg.runs; ++i) {
        const auto t0 = Clock::now();
        sink += denoiser_forward(z, t, audio, masks, params).data(0, 0);
        const auto t1 = Clock::now();
        r.samples_ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    require(std::isfinite(sink), ErrorCode::non_finite, "non-finite denoiser output while timing");

    r.median_ns = percentile(r.samples_ns, 0.5);
    r.p10_ns = percentile(r.samples_ns, 0.1);
    r.p90_ns = percentile(r.samples_ns, 0.9);
    const double granularity = clock_granularity_ns();
    require(r.median_ns >= 100.0 * granularity, ErrorCode::timer_resolution,
            "per-call time " + std::to_string(r.median_ns) + " ns is below 100x the clock granularity (" +
                std::to_string(granularity) + " ns); use a larger config");
    return r;
}

CompareReport compare(AdapterKind a, AdapterKind b, const BenchCfg& cfg) {
    CompareReport r{a, b, cfg, time_inference(cfg, a), time_inference(cfg, b), count_flops(cfg.flop_cfg()), 0.0, 0.0};
    r.improvement = (r.timing_b.median_ns - r.timing_a.median_ns) / r.timing_b.median_ns;
    r.flop_ratio = static_cast<double>(r.flops.total(b)) / static_cast<double>(r.flops.total(a));
    return r;
}

std::string flops_table(const FlopReport& r) {
    std::ostringstream os;
    const auto& c = r.cfg;
    os << "config: C=" << c.channels << " D=" << c.attn_dim << " D_a=" << c.audio_dim << " T_a=" << c.audio_tokens
       << " H=" << c.height << " W=" << c.width << " heads=" << c.heads << " k=" << c.kernel << "\n";
    os << "unit: multiply-accumulates (MACs)\n";
    os << std::left << std::setw(14) << "op" << std::right << std::setw(16) << "semi" << std::setw(16) << "fully"
       << "\n";
    auto row = [&](const char* name, std::uint64_t one) {
        os << std::left << std::setw(14) << name << std::right << std::setw(16) << one << std::setw(16) << 3 * one
           << "\n";
    };
    row("q_proj", r.attention.q_proj);
    row("k_proj", r.attention.k_proj);
    row("v_proj", r.attention.v_proj);
    row("scores", r.attention.scores);
    row("weighted_sum", r.attention.weighted_sum);
    row("out_proj", r.attention.out_proj);
    os << std::left << std::setw(14) << "attention" << std::right << std::setw(16) << r.attention_macs(AdapterKind::semi)
       << std::setw(16) << r.attention_macs(AdapterKind::fully) << "\n";
    os << std::left << std::setw(14) << "zero_convs" << std::right << std::setw(16) << r.zero_convs << std::setw(16)
       << 0 << "\n";
    os << std::left << std::setw(14) << "total" << std::right << std::setw(16) << r.semi_total << std::setw(16)
       << r.fully_total << "\n";
    os << std::left << std::setw(14) << "parameters" << std::right << std::setw(16) << r.semi_params << std::setw(16)
       << r.fully_params << "\n";
    os << std::left << std::setw(14) << "act_bytes" << std::right << std::setw(16)
       << r.activation_bytes(AdapterKind::semi) << std::setw(16) << r.activation_bytes(AdapterKind::fully) << "\n";
    os << "ratio fully/semi: " << std::fixed << std::setprecision(4) << r.ratio << "\n";
    return os.str();
}

std::string compare_table(const CompareReport& r) {
    std::ostringstream os;
    os << "config " << r.cfg.name << ": " << r.cfg.digest_text() << "\n";
    os << std::left << std::setw(8) << "kind" << std::right << std::setw(14) << "median_ms" << std::setw(14) << "p10_ms"
       << std::setw(14) << "p90_ms" << std::setw(16) << "adapter_MACs" << "\n";
    auto row = [&](AdapterKind k, const TimingReport& t) {
        os << std::left << std::setw(8) << to_string(k) << std::right << std::fixed << std::setprecision(3)
           << std::setw(14) << t.median_ns / 1e6 << std::setw(14) << t.p10_ns / 1e6 << std::setw(14)
           << t.p90_ns / 1e6 << std::setw(16) << r.flops.total(k) << "\n";
    };
    row(r.kind_a, r.timing_a);
    row(r.kind_b, r.timing_b);
    os << "time improvement of " << to_string(r.kind_a) << " over " << to_string(r.kind_b) << ": "
       << std::setprecision(1) << 100.0 * r.improvement << "%\n";
    os << "adapter MAC ratio " << to_string(r.kind_b) << "/" << to_string(r.kind_a) << ": " << std::setprecision(4)
       << r.flop_ratio << "\n";
    if (!r.cfg.single_thread) os << "note: multi-threaded run, timings are indicative only\n";
    return os.str();
}

std::string compare_json(const CompareReport& r, const std::string& config_digest) {
    const auto& c = r.cfg;
    nlohmann::json config = {{"name", c.name},     {"channels", c.channels},   {"attn_dim", c.attn_dim},
                             {"audio_dim", c.audio_dim}, {"audio_tokens", c.audio_tokens}, {"height", c.size},
                             {"width", c.size},    {"heads", c.heads},         {"blocks", c.blocks},
                             {"kernel", c.kernel}, {"warmup", c.warmup}};
    nlohmann::json results = nlohmann::json::array();
    for (auto [kind, timing] : {std::pair{r.kind_a, &r.timing_a}, std::pair{r.kind_b, &r.timing_b}}) {
        results.push_back({{"config", config},
                           {"kind", std::string(to_string(kind))},
                           {"flops", flops_json(r.flops, kind)},
                           {"timing", timing_json(*timing)}});
    }
    nlohmann::json out = {{"config_digest", config_digest},
                          {"results", results},
                          {"improvement", r.improvement},
                          {"flop_ratio", r.flop_ratio},
                          {"fully_over_semi_ratio", r.flops.ratio}};
    return out.dump(2);
}

}  // namespace semidec
