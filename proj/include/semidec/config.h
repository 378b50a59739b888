#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "semidec/bench.h"
#include "semidec/diffusion.h"
#include "semidec/synthetic_faces.h"

namespace semidec {

/// Environment variable that overrides `[run] seed`. It is the only
/// environment override.
inline constexpr const char* kSeedEnvVar = "SEMIDEC_SEED";

/// Everything one run needs. Parsed from a `key = value` file with
/// [sections], validated, then frozen; its digest is stamped into every
/// artifact the run writes.
struct RunConfig {
    std::uint64_t seed = 0;  // model init and training draws

    DenoiserConfig model;
    int context_radius = 1;

    int timesteps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    TrainCfg train;
    int log_every = 50;

    SceneCfg scene;
    int data_samples = 200;
    std::uint64_t data_seed = 1000;
    int holdout_samples = 20;
    std::uint64_t holdout_seed = 900000;

    int sample_steps = 40;
    std::uint64_t sample_seed = 7;

    BenchCfg bench;
    FlopCfg flops = desk_bench_cfg().flop_cfg();

    std::string out_dir = "run";

    void validate() const;
    /// One `section.key=value` line per field, in a fixed order.
    std::string canonical_text() const;
    /// The frozen config in the same INI format it was parsed from.
    std::string to_ini() const;
    std::string digest() const;
    NoiseSchedule schedule() const { return make_schedule(timesteps, beta_start, beta_end); }
};

/// Parses and validates. Unknown sections or keys are errors. When
/// `allow_env_seed` is set, SEMIDEC_SEED replaces `[run] seed`.
RunConfig parse_run_config(std::string_view text, bool allow_env_seed = true);
RunConfig load_run_config(const std::filesystem::path& path, bool allow_env_seed = true);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace semidec
