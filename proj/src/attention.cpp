#include "semidec/attention.h"

#include <cmath>

namespace semidec {
namespace {

thread_local std::uint64_t g_attention_evaluations = 0;

}  // namespace

AttnWeights AttnWeights::init(Index channels, Index audio_dim, Index attn_dim, int heads,
                              std::mt19937_64& rng) {
    require(channels >= 1 && audio_dim >= 1 && attn_dim >= 1 && heads >= 1 && attn_dim % heads == 0,
            ErrorCode::invalid_argument, "attention dims must be positive with heads dividing attn_dim");
    AttnWeights w;
    w.wq = init_uniform(channels, attn_dim, channels, rng);
    w.wk = init_uniform(audio_dim, attn_dim, audio_dim, rng);
    w.wv = init_uniform(audio_dim, attn_dim, audio_dim, rng);
    w.wo = init_uniform(attn_dim, channels, attn_dim, rng);
    w.heads = heads;
    return w;
}

void AttnWeights::validate() const {
    require(heads >= 1 && attn_dim() % heads == 0, ErrorCode::invalid_argument,
            "heads must divide attention dim");
    require(wk.cols() == attn_dim() && wv.cols() == attn_dim() && wv.rows() == audio_dim() &&
                wo.rows() == attn_dim() && wo.cols() == channels(),
            ErrorCode::shape_mismatch, "inconsistent attention weight shapes");
    require(wq.allFinite() && wk.allFinite() && wv.allFinite() && wo.allFinite(), ErrorCode::non_finite,
            "non-finite attention weights");
}

ParamList AttnWeights::params(const std::string& prefix) {
    return {{prefix + "wq", &wq}, {prefix + "wk", &wk}, {prefix + "wv", &wv}, {prefix + "wo", &wo}};
}

Mat softmax_rows(const Mat& m) {
    Mat out(m.rows(), m.cols());
    for (Index r = 0; r < m.rows(); ++r) {
        const double shift = m.row(r).maxCoeff();
        out.row(r) = (m.row(r).array() - shift).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

FeatureMap cross_attention(const Latent& z, const AudioEmbedding& a, const AttnWeights& w,
                           AttentionTape* tape) {
    w.validate();
    require(z.channels() == w.channels(), ErrorCode::shape_mismatch,
            "latent has " + std::to_string(z.channels()) + " channels, W_Q expects " +
                std::to_string(w.channels()));
    require(a.dim() == w.audio_dim(), ErrorCode::shape_mismatch,
            "audio dim " + std::to_string(a.dim()) + " does not match W_K rows " +
                std::to_string(w.audio_dim()));
    require(a.frames() >= 1 && z.pixels() >= 1, ErrorCode::shape_mismatch, "empty attention input");
    require(z.data.allFinite() && a.tokens.allFinite(), ErrorCode::non_finite,
            "non-finite attention input");
    ++g_attention_evaluations;

    const Index dh = w.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat x = z.data.transpose();
    Mat q = x * w.wq;
    Mat k = a.tokens * w.wk;
    Mat v = a.tokens * w.wv;
    Mat o(x.rows(), w.attn_dim());
    std::vector<Mat> probs;
    probs.reserve(static_cast<std::size_t>(w.heads));
    for (int h = 0; h < w.heads; ++h) {
        const Index c0 = h * dh;
        Mat p = softmax_rows((q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose()) * scale);
        o.middleCols(c0, dh).noalias() = p * v.middleCols(c0, dh);
        probs.push_back(std::move(p));
    }

    FeatureMap out;
    out.height = z.height;
    out.width = z.width;
    out.data = (o * w.wo).transpose();

    if (tape != nullptr) {
        tape->x = std::move(x);
        tape->audio = a.tokens;
        tape->q = std::move(q);
        tape->k = std::move(k);
        tape->v = std::move(v);
        tape->probs = std::move(probs);
        tape->o = std::move(o);
        tape->height = z.height;
        tape->width = z.width;
    }
    return out;
}

AttnGrads cross_attention_backward(const AttentionTape& tape, const AttnWeights& w,
                                   const FeatureMap& upstream) {
    require(upstream.channels() == w.channels() && upstream.height == tape.height &&
                upstream.width == tape.width,
            ErrorCode::shape_mismatch, "upstream gradient shape does not match attention output");

    const Index dh = w.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Mat dy = upstream.data.transpose();  // HW x C

    AttnGrads g;
    g.d_weights.heads = w.heads;
    g.d_weights.wo = tape.o.transpose() * dy;
    const Mat d_o = dy * w.wo.transpose();

    Mat d_q(tape.q.rows(), tape.q.cols());
    Mat d_k(tape.k.rows(), tape.k.cols());
    Mat d_v(tape.v.rows(), tape.v.cols());
    for (int h = 0; h < w.heads; ++h) {
        const Index c0 = h * dh;
        const Mat& p = tape.probs[static_cast<std::size_t>(h)];
        const auto d_oh = d_o.middleCols(c0, dh);
        const Mat d_p = d_oh * tape.v.middleCols(c0, dh).transpose();
        d_v.middleCols(c0, dh).noalias() = p.transpose() * d_oh;
        // softmax Jacobian: dS = P .* (dP - rowsum(dP .* P))
        const Eigen::VectorXd row_dot = (d_p.array() * p.array()).rowwise().sum();
        const Mat d_s = (p.array() * (d_p.colwise() - row_dot).array()).matrix() * scale;
        d_q.middleCols(c0, dh).noalias() = d_s * tape.k.middleCols(c0, dh);
        d_k.middleCols(c0, dh).noalias() = d_s.transpose() * tape.q.middleCols(c0, dh);
    }

    g.d_weights.wq = tape.x.transpose() * d_q;
    g.d_weights.wk = tape.audio.transpose() * d_k;
    g.d_weights.wv = tape.audio.transpose() * d_v;
    g.d_latent.height = tape.height;
    g.d_latent.width = tape.width;
    g.d_latent.data = (d_q * w.wq.transpose()).transpose();
    g.d_audio = d_k * w.wk.transpose() + d_v * w.wv.transpose();
    return g;
}

AttnGrads cross_attention_backward(const Latent& z, const AudioEmbedding& a, const AttnWeights& w,
                                   const FeatureMap& upstream) {
    AttentionTape tape;
    cross_attention(z, a, w, &tape);
    --g_attention_evaluations;
    return cross_attention_backward(tape, w, upstream);
}

std::uint64_t attention_evaluations() { return g_attention_evaluations; }

}  // namespace semidec
