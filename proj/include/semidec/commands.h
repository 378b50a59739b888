#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "semidec/config.h"
#include "semidec/metrics.h"

namespace semidec {

namespace fs = std::filesystem;

// Subcommand bodies for the `semidec` tool. Each returns normally on
// success and throws semidec::Error otherwise; the tool turns errors into a
// one-line `error: <code>: <message>` and a nonzero exit.

struct Checkpoint {
    RunConfig config;
    DenoiserParams params;
};

void save_checkpoint(const fs::path& dir, const RunConfig& cfg, DenoiserParams& params);
Checkpoint load_checkpoint(const fs::path& dir);

/// Writes sample_NNNN.sdtf, masks.sdtf and manifest.txt; returns the
/// manifest digest.
std::string cmd_make_data(int n, std::uint64_t seed, const fs::path& out_dir, const SceneCfg& scene,
                          std::ostream& log);

struct TrainSummary {
    std::vector<double> losses;
    std::string config_digest;
    fs::path checkpoint_dir;
};

/// Trains on the configured synthetic dataset, logs `step,loss,loss_avg` every
/// `train.log_every` steps to <out_dir>/loss.csv and writes the checkpoint to
/// <out_dir>/checkpoint.
TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log);
TrainSummary cmd_train(const fs::path& config_path, std::ostream& log);

struct SampleRequest {
    fs::path checkpoint;
    std::optional<std::uint64_t> audio_seed;  // synthetic clip from this seed
    std::optional<fs::path> embedding;        // or an SDTF "audio" tensor
    std::optional<fs::path> wav;              // or a PCM16 mono WAV
    std::optional<std::uint64_t> sample_seed;  // overrides [sample] seed
    fs::path out;
    std::optional<fs::path> pgm_dir;
};

std::vector<Latent> cmd_sample(const SampleRequest& req, std::ostream& log);

/// One CSV row per video tensor file found in `videos_dir`. `masks` is a
/// masks SDTF or the string "default".
std::vector<MetricsReport> cmd_eval(const fs::path& videos_dir, const std::string& masks, const fs::path& out_csv,
                                    std::ostream& log);

CompareReport cmd_bench(const fs::path& config_path, const fs::path& out_json, std::ostream& log);
FlopReport cmd_flops(const fs::path& config_path, std::ostream& out);

void write_pgm(const fs::path& path, const Latent& pixels);

/// Energy per frame recovered from the log-power feature.
std::vector<double> energy_from_embedding(const AudioEmbedding& a, double energy_floor = 1e-8);

}  // namespace semidec
