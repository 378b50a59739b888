#pragma once

#include <Eigen/Dense>

#include "semidec/error.h"

namespace semidec {

using Eigen::Index;
using Mat = Eigen::MatrixXd;

/// A [channels x height x width] feature map. `data` is channels x (height*width)
/// with spatial positions flattened row-major (p = y * width + x).
struct Latent {
    Index height = 0;
    Index width = 0;
    Mat data;

    Latent() = default;
    Latent(Index channels, Index h, Index w) : height(h), width(w), data(Mat::Zero(channels, h * w)) {}

    Index channels() const { return data.rows(); }
    Index pixels() const { return height * width; }

    double& at(Index c, Index y, Index x) { return data(c, y * width + x); }
    double at(Index c, Index y, Index x) const { return data(c, y * width + x); }

    bool same_shape(const Latent& o) const {
        return height == o.height && width == o.width && channels() == o.channels();
    }
};

using FeatureMap = Latent;

inline void require_same_shape(const Latent& a, const Latent& b, const char* what) {
    require(a.same_shape(b), ErrorCode::shape_mismatch, std::string(what) + ": latent shapes differ");
}

}  // namespace semidec
