#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semidec/adapters.h"

namespace semidec {

/// Adapter dimensions for analytic cost accounting. Counts are
/// multiply-accumulates (MACs), not 2x FLOPs.
struct FlopCfg {
    std::int64_t channels = 8;
    std::int64_t attn_dim = 16;
    std::int64_t audio_dim = 16;
    std::int64_t audio_tokens = 4;
    std::int64_t height = 4;
    std::int64_t width = 4;
    std::int64_t heads = 4;
    std::int64_t kernel = 1;

    void validate() const;
};

struct AttentionMacs {
    std::uint64_t q_proj = 0;
    std::uint64_t k_proj = 0;
    std::uint64_t v_proj = 0;
    std::uint64_t scores = 0;
    std::uint64_t weighted_sum = 0;
    std::uint64_t out_proj = 0;

    std::uint64_t total() const { return q_proj + k_proj + v_proj + scores + weighted_sum + out_proj; }
};

struct FlopReport {
    FlopCfg cfg;
    AttentionMacs attention;   // one cross-attention evaluation
    std::uint64_t zero_convs;  // three zero-convs, semi only
    std::uint64_t semi_total;
    std::uint64_t fully_total;
    double ratio;  // fully / semi
    std::uint64_t semi_params;
    std::uint64_t fully_params;
    // Values held for the backward pass of one adapter call (f64 each).
    std::uint64_t attention_activations;  // q, k, v, probabilities, head outputs, projection
    std::uint64_t semi_activations;
    std::uint64_t fully_activations;

    std::uint64_t total(AdapterKind kind) const { return kind == AdapterKind::semi ? semi_total : fully_total; }
    std::uint64_t activation_bytes(AdapterKind kind) const {
        return 8 * (kind == AdapterKind::semi ? semi_activations : fully_activations);
    }
    std::uint64_t attention_macs(AdapterKind kind) const {
        return (kind == AdapterKind::semi ? 1 : 3) * attention.total();
    }
};

FlopReport count_flops(const FlopCfg& cfg);

/// Full-denoiser timing configuration. Defaults are the desk-bench config.
struct BenchCfg {
    std::string name = "desk";
    std::int64_t channels = 64;
    std::int64_t attn_dim = 128;
    std::int64_t audio_dim = 10;
    std::int64_t audio_tokens = 16;
    std::int64_t size = 32;
    int heads = 4;
    int blocks = 3;
    int kernel = 1;
    int runs = 50;
    int warmup = 10;
    bool single_thread = true;
    std::uint64_t seed = 0;

    void validate() const;
    FlopCfg flop_cfg() const;
    std::string digest_text() const;
};

BenchCfg small_bench_cfg();
BenchCfg medium_bench_cfg();
BenchCfg desk_bench_cfg();

struct TimingReport {
    double median_ns = 0.0;
    double p10_ns = 0.0;
    double p90_ns = 0.0;
    int runs = 0;
    std::string config_digest;
    bool single_thread = true;
    bool indicative_only = false;
    std::vector<double> samples_ns;
};

/// Linear-interpolated percentile of an unsorted sample, q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Smallest observable steady_clock step, in nanoseconds.
double clock_granularity_ns();

TimingReport time_inference(const BenchCfg& cfg, AdapterKind kind);

struct CompareReport {
    AdapterKind kind_a;
    AdapterKind kind_b;
    BenchCfg cfg;
    TimingReport timing_a;
    TimingReport timing_b;
    FlopReport flops;
    double improvement;  // (median_b - median_a) / median_b
    double flop_ratio;   // total_b / total_a
};

CompareReport compare(AdapterKind a, AdapterKind b, const BenchCfg& cfg);

std::string flops_table(const FlopReport& r);
std::string compare_table(const CompareReport& r);
std::string compare_json(const CompareReport& r, const std::string& config_digest);

}  // namespace semidec
