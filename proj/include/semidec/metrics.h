#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "semidec/adapters.h"

namespace semidec {

// Desk-scale proxies for video quality and lip sync. They are defined here so
// scores are comparable between adapter kinds; they are not the pretrained
// IQA/VQA, SyncNet or VBench numbers.

/// 1 - mean_t mean_pixels |f_{t+1} - f_t|.
double smoothness(std::span<const Latent> frames);

/// Mean over t >= 1 of cos(frame_t, frame_0) restricted to pixels where
/// max(lip, exp) > 0.
double subject_consistency(std::span<const Latent> frames, const RegionMasks& m);

/// Same as subject_consistency on the complement (max(lip, exp) == 0).
double background_consistency(std::span<const Latent> frames, const RegionMasks& m);

struct SyncResult {
    double confidence = 0.0;  // sync_c, max over lags of Pearson r
    int offset = 0;           // sync_d, |best lag|
    bool degenerate = false;  // zero variance in either series
};

/// r_d = Pearson(l_{t+d}, e_t) over the overlap for d in [-max_lag, max_lag].
/// Ties go to smaller |d|, then to negative d.
SyncResult sync_from_series(std::span<const double> lip, std::span<const double> energy, int max_lag = 2);

/// sync_from_series with l_t = mean intensity inside the lip mask of frame t.
SyncResult sync_proxy(std::span<const Latent> frames, const RegionMasks& m, std::span<const double> energy,
                      int max_lag = 2);

/// Mean of frame values weighted by `mask`.
std::vector<double> masked_means(std::span<const Latent> frames, const Eigen::RowVectorXd& mask);

double pearson(std::span<const double> a, std::span<const double> b);

struct MetricsReport {
    std::string id;
    std::string kind;
    double smooth = 0.0;
    double subject = 0.0;
    double background = 0.0;
    double sync_c = 0.0;
    int sync_d = 0;
    bool sync_degenerate = false;
};

MetricsReport evaluate_video(std::span<const Latent> frames, const RegionMasks& m, std::span<const double> energy,
                             int max_lag = 2);

inline constexpr const char* kMetricsCsvHeader = "id,adapter_kind,smooth,subject,background,sync_c,sync_d";
void write_metrics_row(std::ostream& os, const MetricsReport& r);

}  // namespace semidec
