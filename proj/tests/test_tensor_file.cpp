#include <cstring>
#include <fstream>

#include "semidec/tensor_file.h"
#include "test_util.h"

using namespace semidec;

namespace {

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back(v >> 8);
}

void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}

template <typename T>
void put_le(std::vector<std::uint8_t>& b, T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    b.insert(b.end(), raw, raw + sizeof(T));  // host is little-endian
}

}  // namespace

TEST(TensorFile, EncodingMatchesHandAssembledBytes) {
    TensorFile f;
    f.add(Tensor{"ab", {2, 1}, DType::f32, {1.5, -2.0}});
    f.add(Tensor{"x", {1}, DType::f64, {0.1}});

    std::vector<std::uint8_t> expect{'S', 'D', 'T', 'F'};
    put16(expect, 1);
    put16(expect, 2);
    put16(expect, 2);
    expect.push_back('a');
    expect.push_back('b');
    expect.push_back(2);
    put32(expect, 2);
    put32(expect, 1);
    expect.push_back(0);
    put_le(expect, 1.5f);
    put_le(expect, -2.0f);
    put16(expect, 1);
    expect.push_back('x');
    expect.push_back(1);
    put32(expect, 1);
    expect.push_back(1);
    put_le(expect, 0.1);

    EXPECT_EQ(encode_tensor_file(f), expect);
}

TEST(TensorFile, RoundTripIsBitwiseForBothDtypes) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    TensorFile f;
    Tensor a{"f64", {3, 4, 5}, DType::f64, {}};
    Tensor b{"f32", {7}, DType::f32, {}};
    for (int i = 0; i < 60; ++i) a.values.push_back(n(rng));
    for (int i = 0; i < 7; ++i) b.values.push_back(static_cast<float>(n(rng)));
    f.add(a);
    f.add(b);
    f.set_tag("config_digest", "0123456789abcdef");

    const TensorFile g = decode_tensor_file(encode_tensor_file(f));
    ASSERT_EQ(g.tensors().size(), 2u);
    for (const Tensor* t : {&a, &b}) {
        const Tensor& u = g.get(t->name);
        EXPECT_EQ(u.dims, t->dims);
        EXPECT_EQ(u.dtype, t->dtype);
        ASSERT_EQ(u.values.size(), t->values.size());
        EXPECT_EQ(std::memcmp(u.values.data(), t->values.data(), sizeof(double) * u.values.size()), 0);
    }
    EXPECT_EQ(g.tag("config_digest"), "0123456789abcdef");
    EXPECT_EQ(encode_tensor_file(g), encode_tensor_file(f));
}

TEST(TensorFile, FileRoundTrip) {
    testutil::TempDir dir;
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    TensorFile f;
    f.add(matrix_to_tensor("m", m));
    write_tensor_file(dir / "m.sdtf", f);
    const TensorFile g = read_tensor_file(dir / "m.sdtf");
    EXPECT_EQ(g.get("m").dims, (std::vector<std::uint32_t>{2, 3}));
    EXPECT_EQ(g.get("m").values, (std::vector<double>{1, 2, 3, 4, 5, 6}));  // row-major
    EXPECT_EQ(tensor_to_matrix(g.get("m"), 2, 3), m);
}

TEST(TensorFile, EmptyFileIsHeaderError) {
    testutil::TempDir dir;
    std::ofstream(dir / "empty.sdtf").close();
    EXPECT_SEMIDEC_ERROR(read_tensor_file(dir / "empty.sdtf"), ErrorCode::malformed_header);
}

TEST(TensorFile, BadMagicAndVersion) {
    auto bytes = encode_tensor_file(TensorFile{});
    bytes[0] = 'X';
    EXPECT_SEMIDEC_ERROR(decode_tensor_file(bytes), ErrorCode::malformed_header);
    bytes = encode_tensor_file(TensorFile{});
    bytes[4] = 2;
    EXPECT_SEMIDEC_ERROR(decode_tensor_file(bytes), ErrorCode::malformed_header);
}

TEST(TensorFile, ShortPayloadIsTruncation) {
    TensorFile f;
    f.add(Tensor{"audio", {4, 10}, DType::f64, std::vector<double>(40, 0.25)});
    auto bytes = encode_tensor_file(f);
    bytes.resize(bytes.size() - sizeof(double));  // 39 values remain
    EXPECT_SEMIDEC_ERROR(decode_tensor_file(bytes), ErrorCode::truncated_payload);
}

TEST(TensorFile, TrailingBytesAndUnknownDtypeRejected) {
    TensorFile f;
    f.add(Tensor{"v", {1}, DType::f64, {1.0}});
    auto bytes = encode_tensor_file(f);
    bytes.push_back(0);
    EXPECT_SEMIDEC_ERROR(decode_tensor_file(bytes), ErrorCode::malformed_header);
    bytes.pop_back();
    bytes[bytes.size() - sizeof(double) - 1] = 7;
    EXPECT_SEMIDEC_ERROR(decode_tensor_file(bytes), ErrorCode::malformed_header);
}

TEST(TensorFile, NamesAreUnique) {
    TensorFile f;
    f.add(Tensor{"a", {1}, DType::f64, {1.0}});
    EXPECT_SEMIDEC_ERROR(f.add(Tensor{"a", {1}, DType::f64, {2.0}}), ErrorCode::invalid_argument);
    EXPECT_SEMIDEC_ERROR(f.add(Tensor{"b", {2}, DType::f64, {2.0}}), ErrorCode::shape_mismatch);
}

TEST(TensorFile, MissingTensorAndIoErrors) {
    TensorFile f;
    EXPECT_SEMIDEC_ERROR(f.get("nope"), ErrorCode::shape_mismatch);
    EXPECT_SEMIDEC_ERROR(read_tensor_file("/nonexistent/dir/x.sdtf"), ErrorCode::io);
}
