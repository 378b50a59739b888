#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <array>
#include <vector>
#include <variant>

#include "semidec/attention.h"

namespace semidec {

/// Lip, expression and pose masks over the latent grid, flattened row-major
/// to 1 x (height*width). Values lie in [0, 1]; the masks may overlap.
struct RegionMasks {
    Index height = 0;
    Index width = 0;
    Eigen::RowVectorXd lip;
    Eigen::RowVectorXd exp;
    Eigen::RowVectorXd pose;

    static constexpr int kRegions = 3;
    const Eigen::RowVectorXd& region(int i) const { return i == 0 ? lip : (i == 1 ? exp : pose); }
    Eigen::RowVectorXd& region(int i) { return i == 0 ? lip : (i == 1 ? exp : pose); }

    void validate() const;
};

RegionMasks make_default_masks(Index height, Index width);
RegionMasks make_uniform_masks(Index height, Index width, double lip, double exp, double pose);

void save_masks(const RegionMasks& m, const std::filesystem::path& path);
RegionMasks load_masks(const std::filesystem::path& path);

/// Zero-initialised convolution, weight [C_out x C_in x k x k] stored as
/// C_out x (C_in*k*k) with column index ci*k*k + ky*k + kx. Zero padding,
/// stride 1, so the output keeps the input's spatial size.
struct ZeroConvParams {
    Mat weight;
    Mat bias;  // C_out x 1
    int kernel = 1;

    Index in_channels() const { return weight.cols() / (kernel * kernel); }
    Index out_channels() const { return weight.rows(); }
    ParamList params(const std::string& prefix);
};

ZeroConvParams zero_conv_init(Index in_channels, Index out_channels, int kernel);

FeatureMap conv_forward(const ZeroConvParams& p, const FeatureMap& x);

struct ConvGrads {
    FeatureMap d_input;
    ZeroConvParams d_params;
};
ConvGrads conv_backward(const ZeroConvParams& p, const FeatureMap& x, const FeatureMap& upstream);

/// One shared cross-attention followed by three masked zero-convolutions
/// whose outputs are summed.
struct SemiDecoupledParams {
    AttnWeights attn;
    ZeroConvParams zc_lip, zc_exp, zc_pose;

    static SemiDecoupledParams init(Index channels, Index audio_dim, Index attn_dim, int heads, int kernel,
                                    std::mt19937_64& rng);

    ZeroConvParams& conv(int i) { return i == 0 ? zc_lip : (i == 1 ? zc_exp : zc_pose); }
    const ZeroConvParams& conv(int i) const { return i == 0 ? zc_lip : (i == 1 ? zc_exp : zc_pose); }
    ParamList params(const std::string& prefix);
};

/// Baseline: an independent attention per region, masked and summed.
struct FullyDecoupledParams {
    AttnWeights attn_lip, attn_exp, attn_pose;

    static FullyDecoupledParams init(Index channels, Index audio_dim, Index attn_dim, int heads,
                                     std::mt19937_64& rng);

    AttnWeights& attn(int i) { return i == 0 ? attn_lip : (i == 1 ? attn_exp : attn_pose); }
    const AttnWeights& attn(int i) const { return i == 0 ? attn_lip : (i == 1 ? attn_exp : attn_pose); }
    ParamList params(const std::string& prefix);
};

enum class AdapterKind { semi, fully };

std::string_view to_string(AdapterKind kind);
AdapterKind parse_adapter_kind(std::string_view text);

using AdapterParams = std::variant<SemiDecoupledParams, FullyDecoupledParams>;

AdapterKind kind_of(const AdapterParams& p);
ParamList adapter_params(AdapterParams& p, const std::string& prefix);

FeatureMap semi_decoupled_forward(const Latent& z_t, const AudioEmbedding& a, const RegionMasks& m,
                                  const SemiDecoupledParams& p);
FeatureMap fully_decoupled_forward(const Latent& z_t, const AudioEmbedding& a, const RegionMasks& m,
                                   const FullyDecoupledParams& p);

/// Forward intermediates for either adapter kind.
struct AdapterTape {
    std::vector<AttentionTape> attention;  // 1 for semi, 3 for fully
    FeatureMap coupled;                    // semi only: F_coup
    std::array<FeatureMap, 3> masked;      // semi only: F_coup * M_i
};

FeatureMap adapter_forward(const AdapterParams& p, const Latent& z_t, const AudioEmbedding& a,
                           const RegionMasks& m, AdapterTape* tape = nullptr);

struct AdapterGrads {
    Latent d_latent;
    Mat d_audio;
    AdapterParams d_params;
};

AdapterGrads adapter_backward(const AdapterParams& p, const AdapterTape& tape, const RegionMasks& m,
                              const FeatureMap& upstream);
AdapterGrads adapter_backward(const AdapterParams& p, const Latent& z_t, const AudioEmbedding& a,
                              const RegionMasks& m, const FeatureMap& upstream);

}  // namespace semidec
