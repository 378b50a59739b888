#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semidec/audio_features.h"
#include "semidec/latent.h"
#include "semidec/params.h"

namespace semidec {

/// Multi-head cross-attention weights. Queries come from a C-channel latent,
/// keys and values from D_a-dimensional audio tokens, D is split into
/// `heads` equal slices.
struct AttnWeights {
    Mat wq;  // C x D
    Mat wk;  // D_a x D
    Mat wv;  // D_a x D
    Mat wo;  // D x C
    int heads = 1;

    static AttnWeights init(Index channels, Index audio_dim, Index attn_dim, int heads,
                            std::mt19937_64& rng);

    Index channels() const { return wq.rows(); }
    Index audio_dim() const { return wk.rows(); }
    Index attn_dim() const { return wq.cols(); }
    Index head_dim() const { return attn_dim() / heads; }

    void validate() const;
    ParamList params(const std::string& prefix);
};

struct AttnGrads {
    Latent d_latent;
    Mat d_audio;  // T_a x D_a
    AttnWeights d_weights;
};

/// Intermediates kept by the forward pass for the reverse pass.
struct AttentionTape {
    Mat x;                   // HW x C, the flattened query latent
    Mat audio;               // T_a x D_a
    Mat q, k, v;             // HW x D, T_a x D, T_a x D
    std::vector<Mat> probs;  // per head, HW x T_a
    Mat o;                   // HW x D, concatenated head outputs
    Index height = 0, width = 0;
};

/// Numerically stable row softmax (each row shifted by its max).
Mat softmax_rows(const Mat& m);

FeatureMap cross_attention(const Latent& z, const AudioEmbedding& a, const AttnWeights& w,
                           AttentionTape* tape = nullptr);

AttnGrads cross_attention_backward(const AttentionTape& tape, const AttnWeights& w,
                                   const FeatureMap& upstream);
AttnGrads cross_attention_backward(const Latent& z, const AudioEmbedding& a, const AttnWeights& w,
                                   const FeatureMap& upstream);

/// Number of cross_attention evaluations on the calling thread.
std::uint64_t attention_evaluations();

}  // namespace semidec
