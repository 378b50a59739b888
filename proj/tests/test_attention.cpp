#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.h"
#include "semidec/attention.h"
#include "test_util.h"

using namespace semidec;

namespace {

struct Case {
    AttnWeights w;
    Latent z;
    AudioEmbedding a;
};

Case random_case(std::mt19937_64& rng, Index C, Index Da, Index D, int heads, Index T, Index H, Index W) {
    Case c{AttnWeights::init(C, Da, D, heads, rng), oracle::random_latent(C, H, W, rng),
           oracle::random_audio(T, Da, rng)};
    oracle::randomize(c.w, rng, 0.7);
    return c;
}

}  // namespace

TEST(Softmax, WorkedRows) {
    Mat m(2, 2);
    m << 0, 0, 0, std::log(3.0);
    const Mat p = softmax_rows(m);
    EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(p(0, 1), 0.5, 1e-15);
    EXPECT_NEAR(p(1, 0), 0.25, 1e-15);
    EXPECT_NEAR(p(1, 1), 0.75, 1e-15);
    const Mat big = softmax_rows(Mat::Constant(1, 3, 1000.0));
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(big(0, j), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, RowsAreStochastic) {
    std::mt19937_64 rng(1);
    const Mat p = softmax_rows(oracle::random_mat(50, 7, rng, 30.0));
    EXPECT_GE(p.minCoeff(), 0.0);
    for (Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
}

TEST(CrossAttention, MatchesBruteForce) {
    std::mt19937_64 rng(2);
    for (int heads : {1, 2, 4}) {
        const Case c = random_case(rng, 3, 5, 8, heads, 6, 3, 4);
        const FeatureMap got = cross_attention(c.z, c.a, c.w);
        EXPECT_LE((got.data - oracle::brute_attention(c.z, c.a, c.w).data).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(CrossAttention, HandPickedSmallIntegerInstance) {
    // C=2, D=2, D_a=2, h=1, H=W=1, T_a=2.
    AttnWeights w;
    w.heads = 1;
    w.wq = (Mat(2, 2) << 1, 0, 0, 1).finished();
    w.wk = (Mat(2, 2) << 1, 2, 0, 1).finished();
    w.wv = (Mat(2, 2) << 2, -1, 1, 3).finished();
    w.wo = (Mat(2, 2) << 1, 1, 0, -1).finished();
    Latent z(2, 1, 1);
    z.data << 1, -1;
    const AudioEmbedding a{(Mat(2, 2) << 1, 0, 0, 1).finished()};
    // q = [1,-1]; k0 = [1,2], k1 = [0,1]; scores = [-1, -1]/sqrt(2) -> p = [0.5, 0.5]
    // v0 = [2,-1], v1 = [1,3]; o = [1.5, 1]; out = o * wo = [1.5, 0.5]
    const FeatureMap out = cross_attention(z, a, w);
    EXPECT_NEAR(out.data(0, 0), 1.5, 1e-12);
    EXPECT_NEAR(out.data(1, 0), 0.5, 1e-12);
    EXPECT_LE((out.data - oracle::brute_attention(z, a, w).data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CrossAttention, SingleTokenIgnoresLatent) {
    std::mt19937_64 rng(3);
    Case c = random_case(rng, 4, 3, 8, 2, 1, 3, 3);
    const FeatureMap out = cross_attention(c.z, c.a, c.w);
    const Eigen::VectorXd expect = ((c.a.tokens * c.w.wv) * c.w.wo).transpose();
    for (Index p = 0; p < out.pixels(); ++p) EXPECT_LE((out.data.col(p) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CrossAttention, IdenticalTokensGiveEvenWeights) {
    std::mt19937_64 rng(4);
    Case c = random_case(rng, 4, 3, 8, 4, 2, 2, 2);
    c.a.tokens.row(1) = c.a.tokens.row(0);
    AttentionTape tape;
    cross_attention(c.z, c.a, c.w, &tape);
    for (const Mat& p : tape.probs) EXPECT_LE((p.array() - 0.5).abs().maxCoeff(), 1e-15);
}

TEST(CrossAttention, RowStochasticAttention) {
    std::mt19937_64 rng(5);
    Case c = random_case(rng, 4, 6, 8, 4, 9, 5, 3);
    AttentionTape tape;
    cross_attention(c.z, c.a, c.w, &tape);
    ASSERT_EQ(tape.probs.size(), 4u);
    for (const Mat& p : tape.probs) {
        for (Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    }
}

TEST(CrossAttention, TokenPermutationInvariance) {
    std::mt19937_64 rng(6);
    Case c = random_case(rng, 3, 4, 6, 3, 7, 4, 4);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    AudioEmbedding permuted{c.a.tokens};
    for (int j = 0; j < 7; ++j) permuted.tokens.row(j) = c.a.tokens.row(perm[j]);
    EXPECT_LE((cross_attention(c.z, c.a, c.w).data - cross_attention(c.z, permuted, c.w).data).cwiseAbs().maxCoeff(),
              1e-12);
}

TEST(CrossAttention, ShapeAndInputErrors) {
    std::mt19937_64 rng(7);
    Case c = random_case(rng, 3, 4, 6, 3, 2, 5, 2);
    const FeatureMap out = cross_attention(c.z, c.a, c.w);
    EXPECT_EQ(out.channels(), 3);
    EXPECT_EQ(out.height, 5);
    EXPECT_EQ(out.width, 2);
    EXPECT_SEMIDEC_ERROR(cross_attention(oracle::random_latent(2, 5, 2, rng), c.a, c.w), ErrorCode::shape_mismatch);
    EXPECT_SEMIDEC_ERROR(cross_attention(c.z, oracle::random_audio(2, 5, rng), c.w), ErrorCode::shape_mismatch);
    Latent bad = c.z;
    bad.data(0, 0) = NAN;
    EXPECT_SEMIDEC_ERROR(cross_attention(bad, c.a, c.w), ErrorCode::non_finite);
    std::mt19937_64 r2(1);
    EXPECT_SEMIDEC_ERROR(AttnWeights::init(3, 4, 6, 4, r2), ErrorCode::invalid_argument);
}

TEST(CrossAttentionBackward, FiniteDifferencesAllTensors) {
    std::mt19937_64 rng(8);
    for (int heads : {1, 2, 4}) {
        Case c = random_case(rng, 3, 4, 4, heads, 3, 2, 3);
        const Mat up = oracle::random_mat(3, 6, rng);
        FeatureMap upstream(3, 2, 3);
        upstream.data = up;
        const AttnGrads g = cross_attention_backward(c.z, c.a, c.w, upstream);
        auto loss = [&] { return oracle::weighted_sum(cross_attention(c.z, c.a, c.w).data, up); };
        AttnWeights dw = g.d_weights;
        const auto r = oracle::finite_difference(c.w.params(""), dw.params(""), loss);
        EXPECT_LE(r.worst, 1e-4) << r.where;
        const auto rz = oracle::finite_difference(c.z.data, g.d_latent.data, "z", loss);
        EXPECT_LE(rz.worst, 1e-4);
        const auto ra = oracle::finite_difference(c.a.tokens, g.d_audio, "a", loss);
        EXPECT_LE(ra.worst, 1e-4);
    }
}

TEST(CrossAttentionBackward, LinearInUpstream) {
    std::mt19937_64 rng(9);
    Case c = random_case(rng, 3, 4, 4, 2, 3, 2, 2);
    FeatureMap up(3, 2, 2);
    const AttnGrads zero = cross_attention_backward(c.z, c.a, c.w, up);
    EXPECT_EQ(zero.d_latent.data.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(zero.d_audio.cwiseAbs().maxCoeff(), 0.0);
    AttnWeights dw = zero.d_weights;
    for (auto& np : dw.params("")) EXPECT_EQ(np.value->cwiseAbs().maxCoeff(), 0.0) << np.name;

    up.data = oracle::random_mat(3, 4, rng);
    FeatureMap up2 = up;
    up2.data *= 2.0;
    const AttnGrads g1 = cross_attention_backward(c.z, c.a, c.w, up), g2 = cross_attention_backward(c.z, c.a, c.w, up2);
    EXPECT_LE((g2.d_latent.data - 2.0 * g1.d_latent.data).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((g2.d_audio - 2.0 * g1.d_audio).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((g2.d_weights.wq - 2.0 * g1.d_weights.wq).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CrossAttention, CounterCountsEvaluations) {
    std::mt19937_64 rng(10);
    Case c = random_case(rng, 2, 2, 2, 1, 2, 1, 1);
    const auto before = attention_evaluations();
    cross_attention(c.z, c.a, c.w);
    cross_attention(c.z, c.a, c.w);
    EXPECT_EQ(attention_evaluations() - before, 2u);
}
