#pragma once

// Independent reference implementations used by the tests. Everything here is
// written with plain loops over scalars so that it shares no code path with
// the matrix implementations under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "semidec/adapters.h"
#include "semidec/attention.h"
#include "semidec/latent.h"

namespace oracle {

using semidec::AudioEmbedding;
using semidec::AttnWeights;
using semidec::FeatureMap;
using semidec::Index;
using semidec::Latent;
using semidec::Mat;

inline Mat random_mat(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = n(rng);
    return m;
}

inline Latent random_latent(Index c, Index h, Index w, std::mt19937_64& rng, double scale = 1.0) {
    Latent z(c, h, w);
    z.data = random_mat(c, h * w, rng, scale);
    return z;
}

inline AudioEmbedding random_audio(Index tokens, Index dim, std::mt19937_64& rng, double scale = 1.0) {
    return AudioEmbedding{random_mat(tokens, dim, rng, scale)};
}

inline semidec::RegionMasks random_masks(Index h, Index w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    semidec::RegionMasks m;
    m.height = h;
    m.width = w;
    m.lip.resize(h * w);
    m.exp.resize(h * w);
    m.pose.resize(h * w);
    for (Index p = 0; p < h * w; ++p) {
        m.lip(p) = u(rng);
        m.exp(p) = u(rng);
        m.pose(p) = u(rng);
    }
    return m;
}

/// out[c, p] = sum_d o[p, d] wo[d, c], o = per-head softmax(q k^T / sqrt(dh)) v.
inline FeatureMap brute_attention(const Latent& z, const AudioEmbedding& a, const AttnWeights& w) {
    const Index C = w.wq.rows(), D = w.wq.cols(), T = a.tokens.rows(), Da = a.tokens.cols();
    const Index dh = D / w.heads;
    std::vector<std::vector<double>> k(T, std::vector<double>(D, 0.0)), v = k;
    for (Index j = 0; j < T; ++j)
        for (Index d = 0; d < D; ++d)
            for (Index e = 0; e < Da; ++e) {
                k[j][d] += a.tokens(j, e) * w.wk(e, d);
                v[j][d] += a.tokens(j, e) * w.wv(e, d);
            }
    FeatureMap out(C, z.height, z.width);
    for (Index p = 0; p < z.pixels(); ++p) {
        std::vector<double> q(D, 0.0), o(D, 0.0);
        for (Index d = 0; d < D; ++d)
            for (Index c = 0; c < C; ++c) q[d] += z.data(c, p) * w.wq(c, d);
        for (int h = 0; h < w.heads; ++h) {
            std::vector<double> e(T);
            double total = 0.0;
            for (Index j = 0; j < T; ++j) {
                double s = 0.0;
                for (Index d = h * dh; d < (h + 1) * dh; ++d) s += q[d] * k[j][d];
                e[j] = std::exp(s / std::sqrt(static_cast<double>(dh)));
                total += e[j];
            }
            for (Index j = 0; j < T; ++j)
                for (Index d = h * dh; d < (h + 1) * dh; ++d) o[d] += e[j] / total * v[j][d];
        }
        for (Index c = 0; c < C; ++c)
            for (Index d = 0; d < D; ++d) out.data(c, p) += o[d] * w.wo(d, c);
    }
    return out;
}

/// Same-size convolution with zero padding; weight column = (cin, ky, kx).
inline FeatureMap brute_conv(const semidec::ZeroConvParams& p, const FeatureMap& x) {
    const int k = p.kernel, r = k / 2;
    const Index cout = p.weight.rows(), cin = x.channels();
    FeatureMap out(cout, x.height, x.width);
    for (Index o = 0; o < cout; ++o)
        for (Index y = 0; y < x.height; ++y)
            for (Index xx = 0; xx < x.width; ++xx) {
                double s = p.bias(o, 0);
                for (Index c = 0; c < cin; ++c)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const Index sy = y + ky - r, sx = xx + kx - r;
                            if (sy < 0 || sy >= x.height || sx < 0 || sx >= x.width) continue;
                            s += p.weight(o, c * k * k + ky * k + kx) * x.data(c, sy * x.width + sx);
                        }
                out.data(o, y * x.width + xx) = s;
            }
    return out;
}

inline FeatureMap mask(const FeatureMap& f, const Eigen::RowVectorXd& m) {
    FeatureMap out = f;
    for (Index c = 0; c < f.channels(); ++c)
        for (Index p = 0; p < f.pixels(); ++p) out.data(c, p) = f.data(c, p) * m(p);
    return out;
}

inline FeatureMap brute_semi(const Latent& z, const AudioEmbedding& a, const semidec::RegionMasks& m,
                                 const semidec::SemiDecoupledParams& p) {
    const FeatureMap coup = brute_attention(z, a, p.attn);
    FeatureMap out(z.channels(), z.height, z.width);
    for (int i = 0; i < 3; ++i) out.data += brute_conv(p.conv(i), mask(coup, m.region(i))).data;
    return out;
}

inline FeatureMap brute_fully(const Latent& z, const AudioEmbedding& a, const semidec::RegionMasks& m,
                                  const semidec::FullyDecoupledParams& p) {
    FeatureMap out(z.channels(), z.height, z.width);
    for (int i = 0; i < 3; ++i) out.data += mask(brute_attention(z, a, p.attn(i)), m.region(i)).data;
    return out;
}

/// Overwrites every parameter with N(0, scale^2) draws.
template <typename P>
void randomize(P& p, std::mt19937_64& rng, double scale) {
    for (auto& np : p.params("")) *np.value = random_mat(np.value->rows(), np.value->cols(), rng, scale);
}

/// Relative error with a floor on the denominator, so entries whose true
/// gradient is ~0 are judged on absolute error instead.
inline double rel_error(double analytic, double numeric, double floor = 1e-5) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct FdResult {
    double worst = 0.0;
    std::string where;
    std::size_t checked = 0;
};

/// Central differences of `loss` against `analytic`, entry by entry, over
/// `params` (perturbed in place and restored).
inline FdResult finite_difference(semidec::ParamList params, semidec::ParamList analytic,
                                  const std::function<double()>& loss, double h = 1e-5) {
    FdResult r;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Mat& value = *params[i].value;
        const Mat& grad = *analytic[i].value;
        for (Index j = 0; j < value.size(); ++j) {
            const double saved = value.data()[j];
            value.data()[j] = saved + h;
            const double up = loss();
            value.data()[j] = saved - h;
            const double down = loss();
            value.data()[j] = saved;
            const double e = rel_error(grad.data()[j], (up - down) / (2.0 * h));
            ++r.checked;
            if (e > r.worst) {
                r.worst = e;
                r.where = params[i].name + "[" + std::to_string(j) + "]";
            }
        }
    }
    return r;
}

/// Central differences over a plain matrix input.
inline FdResult finite_difference(Mat& input, const Mat& analytic, const std::string& name,
                                  const std::function<double()>& loss, double h = 1e-5) {
    semidec::ParamList p{{name, &input}};
    Mat g = analytic;
    semidec::ParamList a{{name, &g}};
    return finite_difference(p, a, loss, h);
}

inline double weighted_sum(const Mat& out, const Mat& weights) { return (out.array() * weights.array()).sum(); }

}  // namespace oracle
