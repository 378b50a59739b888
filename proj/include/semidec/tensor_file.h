#pragma once

// SDTF: the binary container used for embeddings, masks, datasets, samples
// and checkpoints.
//
//   magic   "SDTF"
//   u16     version (1)
//   u16     tensor count
//   per tensor:
//     u16   name length, then UTF-8 name bytes
//     u8    rank
//     u32   dims[rank]
//     u8    dtype (0 = f32, 1 = f64)
//     payload, little-endian, row-major, product(dims) * sizeof(dtype)
//
// Tensor names are unique within a file. String metadata (config digest,
// adapter kind) travels as zero-element tensors named "@key=value".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace semidec {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct Tensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    DType dtype = DType::f64;
    std::vector<double> values;  // row-major

    std::size_t numel() const;
};

class TensorFile {
public:
    void add(Tensor tensor);
    bool contains(std::string_view name) const;
    const Tensor& get(std::string_view name) const;
    const std::vector<Tensor>& tensors() const { return tensors_; }

    void set_tag(const std::string& key, const std::string& value);
    std::optional<std::string> tag(std::string_view key) const;
    const std::vector<std::pair<std::string, std::string>>& tags() const { return tags_; }

private:
    std::vector<Tensor> tensors_;
    std::vector<std::pair<std::string, std::string>> tags_;
};

inline constexpr std::uint16_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes);

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path);

// Row-major conversion between Eigen matrices and tensors. `dims` must
// multiply out to rows * cols; it defaults to {rows, cols}.
Tensor matrix_to_tensor(std::string name, const Eigen::MatrixXd& m,
                        std::vector<std::uint32_t> dims = {}, DType dtype = DType::f64);
Eigen::MatrixXd tensor_to_matrix(const Tensor& t, Eigen::Index rows, Eigen::Index cols);

}  // namespace semidec
