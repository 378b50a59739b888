#include <algorithm>
#include <cmath>
#include <sstream>

#include "semidec/metrics.h"
#include "test_util.h"

using namespace semidec;

namespace {

std::vector<Latent> constant_video(int n, double v, Index size = 16) {
    std::vector<Latent> out(static_cast<std::size_t>(n), Latent(1, size, size));
    for (auto& f : out) f.data.setConstant(v);
    return out;
}

double brute_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Pearson(lip[t + d], energy[t]) over the overlap, by direct enumeration.
double lag_r(const std::vector<double>& lip, const std::vector<double>& energy, int d) {
    std::vector<double> a, b;
    for (int t = 0; t < static_cast<int>(energy.size()); ++t) {
        if (t + d < 0 || t + d >= static_cast<int>(lip.size())) continue;
        a.push_back(lip[t + d]);
        b.push_back(energy[t]);
    }
    return brute_pearson(a, b);
}

std::vector<double> random_series(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST(Smoothness, Fixtures) {
    EXPECT_EQ(smoothness(constant_video(16, 0.3)), 1.0);
    std::vector<Latent> alt(16, Latent(1, 8, 8));
    for (int t = 0; t < 16; ++t) alt[t].data.setConstant(t % 2);
    EXPECT_EQ(smoothness(alt), 0.0);
    auto two = constant_video(2, 0.2);
    two[1].data.setConstant(0.7);
    EXPECT_DOUBLE_EQ(smoothness(two), 0.5);
    EXPECT_SEMIDEC_ERROR(smoothness(constant_video(1, 0.2)), ErrorCode::invalid_argument);
}

TEST(Smoothness, InvariantToConstantImage) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    std::vector<Latent> v(6, Latent(1, 8, 8));
    for (auto& f : v)
        for (Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = u(rng);
    Latent offset(1, 8, 8);
    for (Index i = 0; i < offset.data.size(); ++i) offset.data.data()[i] = u(rng);
    auto shifted = v;
    for (auto& f : shifted) f.data += offset.data;
    EXPECT_NEAR(smoothness(v), smoothness(shifted), 1e-15);
}

TEST(Consistency, Fixtures) {
    const RegionMasks m = make_default_masks(16, 16);
    EXPECT_NEAR(subject_consistency(constant_video(16, 0.4), m), 1.0, 1e-12);
    EXPECT_NEAR(background_consistency(constant_video(16, 0.4), m), 1.0, 1e-12);

    auto scaled = constant_video(3, 0.2);
    scaled[1].data *= 2.0;
    scaled[2].data *= 3.0;
    EXPECT_NEAR(subject_consistency(scaled, m), 1.0, 1e-15);
    EXPECT_NEAR(background_consistency(scaled, m), 1.0, 1e-15);

    // frame 1 lives where frame 0 is zero, inside each region
    for (bool foreground : {true, false}) {
        auto v = constant_video(2, 0.0);
        int k = 0;
        for (Index p = 0; p < 256; ++p) {
            const bool fg = std::max(m.lip(p), m.exp(p)) > 0.0;
            if (fg != foreground) continue;
            v[(k++) % 2].data(0, p) = 1.0;
        }
        const double c = foreground ? subject_consistency(v, m) : background_consistency(v, m);
        EXPECT_EQ(c, 0.0);
    }

    auto zero = constant_video(3, 0.0);
    EXPECT_EQ(subject_consistency(zero, m), 0.0);  // zero-vector guard
    EXPECT_SEMIDEC_ERROR(subject_consistency(constant_video(3, 0.1, 16), make_uniform_masks(16, 16, 0, 0, 1)),
                         ErrorCode::invalid_argument);
}

TEST(Sync, FixtureSeries) {
    std::mt19937_64 rng(2);
    const auto e = random_series(rng, 16);
    const SyncResult same = sync_from_series(e, e);
    EXPECT_NEAR(same.confidence, 1.0, 1e-12);
    EXPECT_EQ(same.offset, 0);

    std::vector<double> lagged(16);
    for (int t = 0; t < 16; ++t) lagged[t] = t == 0 ? 0.3 : e[t - 1];
    const SyncResult lag = sync_from_series(lagged, e);
    EXPECT_NEAR(lag.confidence, 1.0, 1e-12);
    EXPECT_EQ(lag.offset, 1);
    EXPECT_FALSE(lag.degenerate);
}

TEST(Sync, MatchesBruteForceOverLags) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto e = random_series(rng, 16);
        auto lip = random_series(rng, 16);
        if (trial % 3 == 0)
            for (auto& x : lip) x = -x;  // includes the anti-correlated case
        if (trial % 3 == 1)
            for (int t = 0; t < 16; ++t) lip[t] = -e[t];
        double best = -2.0;
        int best_d = 0;
        for (int d : {0, -1, 1, -2, 2}) {
            const double r = lag_r(lip, e, d);
            if (r > best + 1e-12) {
                best = r;
                best_d = d;
            }
        }
        const SyncResult s = sync_from_series(lip, e);
        EXPECT_NEAR(s.confidence, best, 1e-12);
        EXPECT_EQ(s.offset, std::abs(best_d));
        EXPECT_LE(s.offset, 2);
        EXPECT_GE(s.confidence, -1.0);
        EXPECT_LE(s.confidence, 1.0);
    }
}

TEST(Sync, TieBreaksTowardSmallerLagThenNegative) {
    // Period-2 series: lags 0 and +-2 tie at r = 1, lags +-1 tie at r = -1.
    std::vector<double> e(16), lip(16);
    for (int t = 0; t < 16; ++t) e[t] = lip[t] = t % 2;
    const SyncResult s = sync_from_series(lip, e);
    EXPECT_NEAR(s.confidence, 1.0, 1e-12);
    EXPECT_EQ(s.offset, 0);
    // Anti-phase: lag 0 and +-2 give -1, lags +-1 tie at +1; the negative lag wins but |d| = 1 either way.
    for (int t = 0; t < 16; ++t) lip[t] = 1 - t % 2;
    const SyncResult a = sync_from_series(lip, e);
    EXPECT_NEAR(a.confidence, 1.0, 1e-12);
    EXPECT_EQ(a.offset, 1);
}

TEST(Sync, SymmetricUnderSwap) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_series(rng, 16), b = random_series(rng, 16);
        EXPECT_NEAR(sync_from_series(a, b).confidence, sync_from_series(b, a).confidence, 1e-12);
    }
}

TEST(Sync, DegenerateSeries) {
    std::mt19937_64 rng(5);
    const auto e = random_series(rng, 16);
    const SyncResult s = sync_from_series(std::vector<double>(16, 0.4), e);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.confidence, 0.0);
    EXPECT_EQ(s.offset, 0);
    EXPECT_TRUE(sync_from_series(e, std::vector<double>(16, 0.0)).degenerate);
    EXPECT_SEMIDEC_ERROR(sync_from_series(std::vector<double>(5), std::vector<double>(5)), ErrorCode::invalid_argument);
    EXPECT_SEMIDEC_ERROR(sync_from_series(e, std::vector<double>(15)), ErrorCode::invalid_argument);
}

TEST(Sync, ProxyReadsTheLipMask) {
    const RegionMasks m = make_default_masks(16, 16);
    std::mt19937_64 rng(6);
    const auto e = random_series(rng, 16);
    std::vector<Latent> frames(16, Latent(1, 16, 16));
    for (int t = 0; t < 16; ++t) {
        frames[t].data.setConstant(0.5);
        for (Index p = 0; p < 256; ++p)
            if (m.lip(p) > 0) frames[t].data(0, p) = e[t];
    }
    const SyncResult s = sync_proxy(frames, m, e);
    EXPECT_NEAR(s.confidence, 1.0, 1e-12);
    EXPECT_EQ(s.offset, 0);
    const auto means = masked_means(frames, m.lip);
    for (int t = 0; t < 16; ++t) EXPECT_NEAR(means[t], e[t], 1e-15);
}

TEST(Report, RangesAndCsv) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const RegionMasks m = make_default_masks(16, 16);
    std::vector<Latent> frames(16, Latent(1, 16, 16));
    for (auto& f : frames)
        for (Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = u(rng);
    MetricsReport r = evaluate_video(frames, m, random_series(rng, 16));
    EXPECT_GE(r.smooth, 0.0);
    EXPECT_LE(r.smooth, 1.0);
    EXPECT_GE(r.subject, -1.0);
    EXPECT_LE(r.subject, 1.0);
    EXPECT_GE(r.background, -1.0);
    EXPECT_LE(r.background, 1.0);
    EXPECT_LE(std::abs(r.sync_d), 2);
    r.id = "clip";
    r.kind = "semi";
    std::ostringstream os;
    write_metrics_row(os, r);
    const std::string row = os.str();
    EXPECT_EQ(row.rfind("clip,semi,", 0), 0u);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 6);
    EXPECT_STREQ(kMetricsCsvHeader, "id,adapter_kind,smooth,subject,background,sync_c,sync_d");
}
