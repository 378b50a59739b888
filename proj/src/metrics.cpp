#include "semidec/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>

namespace semidec {
namespace {

void require_frames(std::span<const Latent> frames, std::size_t min_count) {
    require(frames.size() >= min_count, ErrorCode::invalid_argument,
            "need at least " + std::to_string(min_count) + " frames, got " + std::to_string(frames.size()));
    for (const auto& f : frames) require_same_shape(f, frames.front(), "video frames");
}

double region_cosine(std::span<const Latent> frames, const RegionMasks& m, bool foreground) {
    require_frames(frames, 2);
    require(m.height == frames.front().height && m.width == frames.front().width, ErrorCode::shape_mismatch,
            "masks do not match frame size");
    std::vector<Index> pixels;
    for (Index p = 0; p < m.height * m.width; ++p) {
        const bool fg = std::max(m.lip(p), m.exp(p)) > 0.0;
        if (fg == foreground) pixels.push_back(p);
    }
    require(!pixels.empty(), ErrorCode::invalid_argument,
            foreground ? "empty foreground region" : "empty background region");

    auto vec = [&](const Latent& f) {
        Eigen::VectorXd v(static_cast<Index>(pixels.size()) * f.channels());
        Index k = 0;
        for (Index c = 0; c < f.channels(); ++c) {
            for (Index p : pixels) v(k++) = f.data(c, p);
        }
        return v;
    };
    const Eigen::VectorXd ref = vec(frames.front());
    double total = 0.0;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const Eigen::VectorXd cur = vec(frames[t]);
        const double denom = ref.norm() * cur.norm();
        total += denom > 0.0 ? ref.dot(cur) / denom : 0.0;
    }
    return total / static_cast<double>(frames.size() - 1);
}

}  // namespace

double smoothness(std::span<const Latent> frames) {
    require_frames(frames, 2);
    double total = 0.0;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        total += (frames[t + 1].data - frames[t].data).cwiseAbs().mean();
    }
    return 1.0 - total / static_cast<double>(frames.size() - 1);
}

double subject_consistency(std::span<const Latent> frames, const RegionMasks& m) {
    return region_cosine(frames, m, true);
}

double background_consistency(std::span<const Latent> frames, const RegionMasks& m) {
    return region_cosine(frames, m, false);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size() && a.size() >= 2, ErrorCode::invalid_argument,
            "pearson needs two equal-length series of length >= 2");
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

SyncResult sync_from_series(std::span<const double> lip, std::span<const double> energy, int max_lag) {
    require(max_lag >= 0, ErrorCode::invalid_argument, "max_lag must be >= 0");
    require(lip.size() == energy.size(), ErrorCode::invalid_argument,
            "lip series and energy series differ in length");
    require(lip.size() >= static_cast<std::size_t>(2 * max_lag + 2), ErrorCode::invalid_argument,
            "sync needs at least 2 * max_lag + 2 frames");

    auto flat = [](std::span<const double> s) {
        for (double v : s) {
            if (v != s.front()) return false;
        }
        return true;
    };
    SyncResult best;
    if (flat(lip) || flat(energy)) {
        best.degenerate = true;
        return best;
    }

    const int n = static_cast<int>(lip.size());
    bool have = false;
    int best_lag = 0;
    // Visit lags so the first maximum found already satisfies the tie-break:
    // 0, -1, 1, -2, 2, ...
    for (int mag = 0; mag <= max_lag; ++mag) {
        for (int d : {-mag, mag}) {
            if (mag == 0 && d != 0) continue;
            std::vector<double> l, e;
            for (int t = std::max(0, -d); t < std::min(n, n - d); ++t) {
                l.push_back(lip[static_cast<std::size_t>(t + d)]);
                e.push_back(energy[static_cast<std::size_t>(t)]);
            }
            const double r = pearson(l, e);
            if (!have || r > best.confidence) {
                best.confidence = r;
                best_lag = d;
                have = true;
            }
            if (mag == 0) break;
        }
    }
    best.offset = std::abs(best_lag);
    return best;
}

std::vector<double> masked_means(std::span<const Latent> frames, const Eigen::RowVectorXd& mask) {
    const double weight = mask.sum();
    require(weight > 0.0, ErrorCode::invalid_argument, "mask is empty");
    std::vector<double> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        require(f.pixels() == mask.size(), ErrorCode::shape_mismatch, "mask does not match frame size");
        out.push_back((f.data * mask.transpose()).sum() / (weight * static_cast<double>(f.channels())));
    }
    return out;
}

SyncResult sync_proxy(std::span<const Latent> frames, const RegionMasks& m, std::span<const double> energy,
                      int max_lag) {
    require_frames(frames, 1);
    return sync_from_series(masked_means(frames, m.lip), energy, max_lag);
}

MetricsReport evaluate_video(std::span<const Latent> frames, const RegionMasks& m, std::span<const double> energy,
                             int max_lag) {
    MetricsReport r;
    r.smooth = smoothness(frames);
    r.subject = subject_consistency(frames, m);
    r.background = background_consistency(frames, m);
    const SyncResult s = sync_proxy(frames, m, energy, max_lag);
    r.sync_c = s.confidence;
    r.sync_d = s.offset;
    r.sync_degenerate = s.degenerate;
    return r;
}

void write_metrics_row(std::ostream& os, const MetricsReport& r) {
    os << r.id << ',' << r.kind << ',' << std::setprecision(10) << r.smooth << ',' << r.subject << ','
       << r.background << ',' << r.sync_c << ',' << r.sync_d << '\n';
}

}  // namespace semidec
