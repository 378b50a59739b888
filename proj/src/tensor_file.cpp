#include "semidec/tensor_file.h"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <numeric>

#include "semidec/error.h"

namespace semidec {
namespace {

constexpr char kMagic[4] = {'S', 'D', 'T', 'F'};
constexpr char kTagPrefix = '@';

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    bool has(std::size_t n) const { return in_.size() - pos_ >= n; }

    template <typename U>
    U uint(ErrorCode code, const char* what) {
        require(has(sizeof(U)), code, std::string("unexpected end of file reading ") + what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string string(std::size_t n) {
        require(has(n), ErrorCode::malformed_header, "unexpected end of file reading tensor name");
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

void write_tensor(Writer& w, const Tensor& t) {
    require(t.name.size() <= 0xFFFF, ErrorCode::invalid_argument, "tensor name too long");
    require(t.dims.size() <= 0xFF, ErrorCode::invalid_argument, "tensor rank too large");
    require(t.values.size() == t.numel(), ErrorCode::shape_mismatch,
            "tensor '" + t.name + "' has " + std::to_string(t.values.size()) +
                " values but dims imply " + std::to_string(t.numel()));
    w.uint(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.uint(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.uint(d);
    w.uint(static_cast<std::uint8_t>(t.dtype));
    if (t.dtype == DType::f32) {
        for (double v : t.values) w.f32(static_cast<float>(v));
    } else {
        for (double v : t.values) w.f64(v);
    }
}

}  // namespace

std::size_t Tensor::numel() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t b) { return a * b; });
}

void TensorFile::add(Tensor tensor) {
    require(!tensor.name.empty() && tensor.name.front() != kTagPrefix, ErrorCode::invalid_argument,
            "invalid tensor name '" + tensor.name + "'");
    require(!contains(tensor.name), ErrorCode::invalid_argument,
            "duplicate tensor name '" + tensor.name + "'");
    require(tensor.values.size() == tensor.numel(), ErrorCode::shape_mismatch,
            "tensor '" + tensor.name + "' value count does not match dims");
    tensors_.push_back(std::move(tensor));
}

bool TensorFile::contains(std::string_view name) const {
    return std::any_of(tensors_.begin(), tensors_.end(),
                       [&](const Tensor& t) { return t.name == name; });
}

const Tensor& TensorFile::get(std::string_view name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) return t;
    }
    fail(ErrorCode::shape_mismatch, "missing tensor '" + std::string(name) + "'");
}

void TensorFile::set_tag(const std::string& key, const std::string& value) {
    require(key.find('=') == std::string::npos && !key.empty(), ErrorCode::invalid_argument,
            "invalid tag key '" + key + "'");
    for (auto& [k, v] : tags_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    tags_.emplace_back(key, value);
}

std::optional<std::string> TensorFile::tag(std::string_view key) const {
    for (const auto& [k, v] : tags_) {
        if (k == key) return v;
    }
    return std::nullopt;
}

std::vector<std::uint8_t> encode_tensor_file(const TensorFile& file) {
    const std::size_t count = file.tensors().size() + file.tags().size();
    require(count <= 0xFFFF, ErrorCode::invalid_argument, "too many tensors for one file");

    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.uint(kTensorFileVersion);
    w.uint(static_cast<std::uint16_t>(count));
    for (const auto& [key, value] : file.tags()) {
        write_tensor(w, Tensor{std::string(1, kTagPrefix) + key + "=" + value, {0}, DType::f64, {}});
    }
    for (const auto& t : file.tensors()) write_tensor(w, t);
    return w.take();
}

TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 8, ErrorCode::malformed_header, "file too short for SDTF header");
    require(std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()),
            ErrorCode::malformed_header, "bad magic, expected SDTF");
    Reader r(bytes.subspan(4));
    const auto version = r.uint<std::uint16_t>(ErrorCode::malformed_header, "version");
    require(version == kTensorFileVersion, ErrorCode::malformed_header,
            "unsupported SDTF version " + std::to_string(version));
    const auto count = r.uint<std::uint16_t>(ErrorCode::malformed_header, "tensor count");

    TensorFile file;
    for (std::uint16_t i = 0; i < count; ++i) {
        Tensor t;
        const auto name_len = r.uint<std::uint16_t>(ErrorCode::malformed_header, "name length");
        t.name = r.string(name_len);
        const auto rank = r.uint<std::uint8_t>(ErrorCode::malformed_header, "rank");
        for (std::uint8_t d = 0; d < rank; ++d) {
            t.dims.push_back(r.uint<std::uint32_t>(ErrorCode::malformed_header, "dims"));
        }
        const auto tag = r.uint<std::uint8_t>(ErrorCode::malformed_header, "dtype");
        require(tag <= 1, ErrorCode::malformed_header, "unknown dtype tag " + std::to_string(tag));
        t.dtype = static_cast<DType>(tag);

        const std::size_t n = t.numel();
        const std::size_t width = dtype_size(t.dtype);
        require(n <= r.remaining() / width, ErrorCode::truncated_payload,
                "tensor '" + t.name + "' declares " + std::to_string(n) + " values but only " +
                    std::to_string(r.remaining() / width) + " remain");
        t.values.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            t.values[k] = t.dtype == DType::f32
                              ? static_cast<double>(std::bit_cast<float>(
                                    r.uint<std::uint32_t>(ErrorCode::truncated_payload, "payload")))
                              : std::bit_cast<double>(
                                    r.uint<std::uint64_t>(ErrorCode::truncated_payload, "payload"));
        }

        if (!t.name.empty() && t.name.front() == kTagPrefix) {
            const auto eq = t.name.find('=');
            require(eq != std::string::npos && t.values.empty(), ErrorCode::malformed_header,
                    "malformed tag entry '" + t.name + "'");
            file.set_tag(t.name.substr(1, eq - 1), t.name.substr(eq + 1));
        } else {
            require(!file.contains(t.name), ErrorCode::malformed_header,
                    "duplicate tensor name '" + t.name + "'");
            file.add(std::move(t));
        }
    }
    require(r.remaining() == 0, ErrorCode::malformed_header,
            std::to_string(r.remaining()) + " trailing bytes after last tensor");
    return file;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
    const auto bytes = encode_tensor_file(file);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::io, "write failed for '" + path.string() + "'");
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_tensor_file(bytes);
}

Tensor matrix_to_tensor(std::string name, const Eigen::MatrixXd& m,
                        std::vector<std::uint32_t> dims, DType dtype) {
    if (dims.empty()) {
        dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    }
    Tensor t{std::move(name), std::move(dims), dtype, {}};
    require(t.numel() == static_cast<std::size_t>(m.size()), ErrorCode::shape_mismatch,
            "dims do not match matrix size for tensor '" + t.name + "'");
    t.values.reserve(t.numel());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.values.push_back(m(r, c));
    }
    return t;
}

Eigen::MatrixXd tensor_to_matrix(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
    require(static_cast<std::size_t>(rows * cols) == t.values.size(), ErrorCode::shape_mismatch,
            "tensor '" + t.name + "' has " + std::to_string(t.values.size()) + " values, expected " +
                std::to_string(rows * cols));
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = t.values[k++];
    }
    return m;
}

}  // namespace semidec
