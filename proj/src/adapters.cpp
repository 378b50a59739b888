#include "semidec/adapters.h"

#include <cmath>

#include "semidec/tensor_file.h"

namespace semidec {
namespace {

Index floor_frac(double frac, Index n) { return static_cast<Index>(std::floor(frac * static_cast<double>(n))); }

// Columns of shape (C_in*k*k) x HW; zero padding outside the grid.
Mat im2col(const FeatureMap& x, int k) {
    if (k == 1) return x.data;
    const int r = k / 2;
    Mat cols = Mat::Zero(x.channels() * k * k, x.pixels());
    for (Index c = 0; c < x.channels(); ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Index row = c * k * k + ky * k + kx;
                for (Index y = 0; y < x.height; ++y) {
                    const Index sy = y + ky - r;
                    if (sy < 0 || sy >= x.height) continue;
                    for (Index xx = 0; xx < x.width; ++xx) {
                        const Index sx = xx + kx - r;
                        if (sx < 0 || sx >= x.width) continue;
                        cols(row, y * x.width + xx) = x.data(c, sy * x.width + sx);
                    }
                }
            }
        }
    }
    return cols;
}

FeatureMap col2im(const Mat& cols, Index channels, Index height, Index width, int k) {
    FeatureMap out(channels, height, width);
    if (k == 1) {
        out.data = cols;
        return out;
    }
    const int r = k / 2;
    for (Index c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Index row = c * k * k + ky * k + kx;
                for (Index y = 0; y < height; ++y) {
                    const Index sy = y + ky - r;
                    if (sy < 0 || sy >= height) continue;
                    for (Index x = 0; x < width; ++x) {
                        const Index sx = x + kx - r;
                        if (sx < 0 || sx >= width) continue;
                        out.data(c, sy * width + sx) += cols(row, y * width + x);
                    }
                }
            }
        }
    }
    return out;
}

void require_masks_match(const RegionMasks& m, const Latent& z) {
    m.validate();
    require(m.height == z.height && m.width == z.width, ErrorCode::shape_mismatch,
            "masks are " + std::to_string(m.height) + "x" + std::to_string(m.width) + " but latent is " +
                std::to_string(z.height) + "x" + std::to_string(z.width));
}

FeatureMap masked(const FeatureMap& f, const Eigen::RowVectorXd& mask) {
    FeatureMap out;
    out.height = f.height;
    out.width = f.width;
    out.data = (f.data.array().rowwise() * mask.array()).matrix();
    return out;
}

}  // namespace

void RegionMasks::validate() const {
    const Index n = height * width;
    require(height >= 1 && width >= 1 && lip.size() == n && exp.size() == n && pose.size() == n,
            ErrorCode::shape_mismatch, "region masks must all be height x width");
    for (int i = 0; i < kRegions; ++i) {
        const auto& r = region(i);
        require(r.allFinite() && r.minCoeff() >= 0.0 && r.maxCoeff() <= 1.0, ErrorCode::invalid_argument,
                "mask values must lie in [0, 1]");
    }
}

RegionMasks make_default_masks(Index height, Index width) {
    require(height >= 8 && width >= 8, ErrorCode::invalid_argument, "mask grid must be at least 8x8");
    RegionMasks m;
    m.height = height;
    m.width = width;
    m.lip.setZero(height * width);
    m.exp.setZero(height * width);
    m.pose.setZero(height * width);
    auto fill_rect = [&](Eigen::RowVectorXd& mask, double r0, double r1, double c0, double c1) {
        for (Index y = floor_frac(r0, height); y < floor_frac(r1, height); ++y) {
            for (Index x = floor_frac(c0, width); x < floor_frac(c1, width); ++x) mask(y * width + x) = 1.0;
        }
    };
    fill_rect(m.lip, 0.65, 0.90, 0.30, 0.70);
    fill_rect(m.exp, 0.15, 0.50, 0.20, 0.80);
    m.pose = (1.0 - m.lip.cwiseMax(m.exp).array()).matrix();
    return m;
}

RegionMasks make_uniform_masks(Index height, Index width, double lip, double exp, double pose) {
    RegionMasks m;
    m.height = height;
    m.width = width;
    m.lip = Eigen::RowVectorXd::Constant(height * width, lip);
    m.exp = Eigen::RowVectorXd::Constant(height * width, exp);
    m.pose = Eigen::RowVectorXd::Constant(height * width, pose);
    return m;
}

void save_masks(const RegionMasks& m, const std::filesystem::path& path) {
    m.validate();
    TensorFile file;
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(m.height),
                                          static_cast<std::uint32_t>(m.width)};
    file.add(matrix_to_tensor("lip", m.lip, dims));
    file.add(matrix_to_tensor("exp", m.exp, dims));
    file.add(matrix_to_tensor("pose", m.pose, dims));
    write_tensor_file(path, file);
}

RegionMasks load_masks(const std::filesystem::path& path) {
    const auto file = read_tensor_file(path);
    const auto& lip = file.get("lip");
    require(lip.dims.size() == 2, ErrorCode::shape_mismatch, "mask tensors must be rank 2");
    RegionMasks m;
    m.height = lip.dims[0];
    m.width = lip.dims[1];
    const char* names[] = {"lip", "exp", "pose"};
    for (int i = 0; i < RegionMasks::kRegions; ++i) {
        const auto& t = file.get(names[i]);
        require(t.dims == lip.dims, ErrorCode::shape_mismatch, "mask tensors must share one shape");
        m.region(i) = tensor_to_matrix(t, 1, m.height * m.width);
    }
    m.validate();
    return m;
}

ParamList ZeroConvParams::params(const std::string& prefix) {
    return {{prefix + "weight", &weight}, {prefix + "bias", &bias}};
}

ZeroConvParams zero_conv_init(Index in_channels, Index out_channels, int kernel) {
    require(kernel == 1 || kernel == 3, ErrorCode::invalid_argument,
            "zero-conv kernel must be 1 or 3, got " + std::to_string(kernel));
    require(in_channels >= 1 && out_channels >= 1, ErrorCode::invalid_argument,
            "zero-conv channels must be positive");
    ZeroConvParams p;
    p.kernel = kernel;
    p.weight = Mat::Zero(out_channels, in_channels * kernel * kernel);
    p.bias = Mat::Zero(out_channels, 1);
    return p;
}

FeatureMap conv_forward(const ZeroConvParams& p, const FeatureMap& x) {
    require(x.channels() == p.in_channels(), ErrorCode::shape_mismatch,
            "conv expects " + std::to_string(p.in_channels()) + " input channels, got " +
                std::to_string(x.channels()));
    FeatureMap out;
    out.height = x.height;
    out.width = x.width;
    out.data = p.weight * im2col(x, p.kernel);
    out.data.colwise() += p.bias.col(0);
    return out;
}

ConvGrads conv_backward(const ZeroConvParams& p, const FeatureMap& x, const FeatureMap& upstream) {
    require(upstream.channels() == p.out_channels() && upstream.height == x.height &&
                upstream.width == x.width,
            ErrorCode::shape_mismatch, "conv upstream gradient shape mismatch");
    ConvGrads g;
    g.d_params.kernel = p.kernel;
    g.d_params.weight = upstream.data * im2col(x, p.kernel).transpose();
    g.d_params.bias = upstream.data.rowwise().sum();
    g.d_input = col2im(p.weight.transpose() * upstream.data, x.channels(), x.height, x.width, p.kernel);
    return g;
}

SemiDecoupledParams SemiDecoupledParams::init(Index channels, Index audio_dim, Index attn_dim, int heads,
                                              int kernel, std::mt19937_64& rng) {
    SemiDecoupledParams p;
    p.attn = AttnWeights::init(channels, audio_dim, attn_dim, heads, rng);
    p.zc_lip = zero_conv_init(channels, channels, kernel);
    p.zc_exp = zero_conv_init(channels, channels, kernel);
    p.zc_pose = zero_conv_init(channels, channels, kernel);
    return p;
}

ParamList SemiDecoupledParams::params(const std::string& prefix) {
    ParamList out = attn.params(prefix + "attn.");
    const char* names[] = {"zc_lip.", "zc_exp.", "zc_pose."};
    for (int i = 0; i < RegionMasks::kRegions; ++i) {
        for (auto& np : conv(i).params(prefix + names[i])) out.push_back(np);
    }
    return out;
}

FullyDecoupledParams FullyDecoupledParams::init(Index channels, Index audio_dim, Index attn_dim, int heads,
                                                std::mt19937_64& rng) {
    FullyDecoupledParams p;
    p.attn_lip = AttnWeights::init(channels, audio_dim, attn_dim, heads, rng);
    p.attn_exp = AttnWeights::init(channels, audio_dim, attn_dim, heads, rng);
    p.attn_pose = AttnWeights::init(channels, audio_dim, attn_dim, heads, rng);
    return p;
}

ParamList FullyDecoupledParams::params(const std::string& prefix) {
    ParamList out;
    const char* names[] = {"attn_lip.", "attn_exp.", "attn_pose."};
    for (int i = 0; i < RegionMasks::kRegions; ++i) {
        for (auto& np : attn(i).params(prefix + names[i])) out.push_back(np);
    }
    return out;
}

std::string_view to_string(AdapterKind kind) { return kind == AdapterKind::semi ? "semi" : "fully"; }

AdapterKind parse_adapter_kind(std::string_view text) {
    if (text == "semi") return AdapterKind::semi;
    if (text == "fully") return AdapterKind::fully;
    fail(ErrorCode::invalid_argument, "adapter kind must be 'semi' or 'fully', got '" + std::string(text) + "'");
}

AdapterKind kind_of(const AdapterParams& p) {
    return std::holds_alternative<SemiDecoupledParams>(p) ? AdapterKind::semi : AdapterKind::fully;
}

ParamList adapter_params(AdapterParams& p, const std::string& prefix) {
    return std::visit([&](auto& q) { return q.params(prefix); }, p);
}

namespace {

FeatureMap semi_forward(const SemiDecoupledParams& p, const Latent& z_t, const AudioEmbedding& a,
                        const RegionMasks& m, AdapterTape* tape) {
    require_masks_match(m, z_t);
    AttentionTape* at = nullptr;
    if (tape != nullptr) {
        tape->attention.resize(1);
        at = &tape->attention[0];
    }
    FeatureMap coupled = cross_attention(z_t, a, p.attn, at);
    FeatureMap out(z_t.channels(), z_t.height, z_t.width);
    for (int i = 0; i < RegionMasks::kRegions; ++i) {
        FeatureMap g = masked(coupled, m.region(i));
        out.data += conv_forward(p.conv(i), g).data;
        if (tape != nullptr) tape->masked[static_cast<std::size_t>(i)] = std::move(g);
    }
    if (tape != nullptr) tape->coupled = std::move(coupled);
    return out;
}

FeatureMap fully_forward(const FullyDecoupledParams& p, const Latent& z_t, const AudioEmbedding& a,
                         const RegionMasks& m, AdapterTape* tape) {
    require_masks_match(m, z_t);
    if (tape != nullptr) tape->attention.resize(RegionMasks::kRegions);
    FeatureMap out(z_t.channels(), z_t.height, z_t.width);
    for (int i = 0; i < RegionMasks::kRegions; ++i) {
        AttentionTape* at = tape != nullptr ? &tape->attention[static_cast<std::size_t>(i)] : nullptr;
        const FeatureMap f = cross_attention(z_t, a, p.attn(i), at);
        out.data.array() += f.data.array().rowwise() * m.region(i).array();
    }
    return out;
}

}  // namespace

FeatureMap adapter_forward(const AdapterParams& p, const Latent& z_t, const AudioEmbedding& a,
                           const RegionMasks& m, AdapterTape* tape) {
    if (const auto* semi = std::get_if<SemiDecoupledParams>(&p)) return semi_forward(*semi, z_t, a, m, tape);
    return fully_forward(std::get<FullyDecoupledParams>(p), z_t, a, m, tape);
}

FeatureMap semi_decoupled_forward(const Latent& z_t, const AudioEmbedding& a, const RegionMasks& m,
                                  const SemiDecoupledParams& p) {
    return semi_forward(p, z_t, a, m, nullptr);
}

FeatureMap fully_decoupled_forward(const Latent& z_t, const AudioEmbedding& a, const RegionMasks& m,
                                   const FullyDecoupledParams& p) {
    return fully_forward(p, z_t, a, m, nullptr);
}

AdapterGrads adapter_backward(const AdapterParams& p, const AdapterTape& tape, const RegionMasks& m,
                              const FeatureMap& upstream) {
    AdapterGrads g;
    if (const auto* semi = std::get_if<SemiDecoupledParams>(&p)) {
        SemiDecoupledParams d;
        d.attn.heads = semi->attn.heads;
        FeatureMap d_coupled(upstream.channels(), upstream.height, upstream.width);
        for (int i = 0; i < RegionMasks::kRegions; ++i) {
            ConvGrads cg = conv_backward(semi->conv(i), tape.masked[static_cast<std::size_t>(i)], upstream);
            d.conv(i) = std::move(cg.d_params);
            d_coupled.data.array() += cg.d_input.data.array().rowwise() * m.region(i).array();
        }
        AttnGrads ag = cross_attention_backward(tape.attention.at(0), semi->attn, d_coupled);
        d.attn = std::move(ag.d_weights);
        g.d_latent = std::move(ag.d_latent);
        g.d_audio = std::move(ag.d_audio);
        g.d_params = std::move(d);
        return g;
    }

    const auto& fully = std::get<FullyDecoupledParams>(p);
    FullyDecoupledParams d;
    for (int i = 0; i < RegionMasks::kRegions; ++i) {
        FeatureMap d_f = masked(upstream, m.region(i));
        AttnGrads ag = cross_attention_backward(tape.attention.at(static_cast<std::size_t>(i)), fully.attn(i), d_f);
        d.attn(i) = std::move(ag.d_weights);
        if (i == 0) {
            g.d_latent = std::move(ag.d_latent);
            g.d_audio = std::move(ag.d_audio);
        } else {
            g.d_latent.data += ag.d_latent.data;
            g.d_audio += ag.d_audio;
        }
    }
    g.d_params = std::move(d);
    return g;
}

AdapterGrads adapter_backward(const AdapterParams& p, const Latent& z_t, const AudioEmbedding& a,
                              const RegionMasks& m, const FeatureMap& upstream) {
    AdapterTape tape;
    adapter_forward(p, z_t, a, m, &tape);
    return adapter_backward(p, tape, m, upstream);
}

}  // namespace semidec
