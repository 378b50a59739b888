#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace semidec {

/// Non-owning handle to one parameter tensor, used by the optimizer,
/// checkpointing and gradient checks. Parameter structs expose
/// `params(prefix)` returning these in a stable order, so a gradient struct
/// of the same type lines up entry for entry.
struct NamedParam {
    std::string name;
    Eigen::MatrixXd* value;
};

using ParamList = std::vector<NamedParam>;

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Eigen::MatrixXd init_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                                    std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    }
    return m;
}

template <typename P>
P zeros_like(const P& p) {
    P z = p;
    for (auto& np : z.params("")) np.value->setZero();
    return z;
}

template <typename P>
std::size_t parameter_count(const P& p) {
    P copy = p;
    std::size_t n = 0;
    for (const auto& np : copy.params("")) n += static_cast<std::size_t>(np.value->size());
    return n;
}

}  // namespace semidec
