#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "support.hpp"

using namespace mlcsc;
using testing_support::random_dense;
using testing_support::sparse_random_layer;

namespace {

// two 4x4 images, pixel value = 16 * image + 4 * row + col
std::string fixture() {
    std::string b{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 4, 0, 0, 0, 4};
    for (int i = 0; i < 32; ++i) b.push_back(static_cast<char>(i * 8));
    return b;
}

std::size_t error_offset(const std::string& bytes) {
    try {
        parse_idx_images(bytes);
    } catch (const ParseError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "expected ParseError";
    return std::numeric_limits<std::size_t>::max();
}

}  // namespace

TEST(Idx, ParsesCraftedFixtureExactly) {
    const IdxImages img = parse_idx_images(fixture());
    EXPECT_EQ(img.count, 2u);
    EXPECT_EQ(img.rows, 4u);
    EXPECT_EQ(img.cols, 4u);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(img.at(i, r, c), (16.0 * i + 4.0 * r + c) * 8.0 / 255.0);

    const auto signals = idx_to_signals(img, false);
    ASSERT_EQ(signals.size(), 2u);
    EXPECT_EQ(signals[1].geometry().spatial_len, 4u);
    EXPECT_EQ(signals[1].geometry().channels, 4u);
    EXPECT_DOUBLE_EQ(signals[1].at(2, 3), img.at(1, 2, 3));

    const auto centered = idx_to_signals(img, true);
    EXPECT_NEAR((centered[0] + centered[1]).norm(), 0.0, 1e-15);
    EXPECT_EQ(idx_to_signals(img, false, 1).size(), 1u);

    std::vector<std::uint8_t> px;
    for (int i = 0; i < 32; ++i) px.push_back(static_cast<std::uint8_t>(i * 8));
    EXPECT_EQ(serialize_idx_images(2, 4, 4, px), fixture());
}

TEST(Idx, MalformedInputs) {
    EXPECT_EQ(error_offset(""), 0u);
    std::string labels = fixture();
    labels[3] = 1;
    EXPECT_EQ(error_offset(labels), 0u);
    const std::string cut = fixture().substr(0, 16 + 20);
    EXPECT_EQ(error_offset(cut), cut.size());
    EXPECT_EQ(error_offset(fixture().substr(0, 10)), 10u);

    std::string lab{0, 0, 8, 1, 0, 0, 0, 3, 7, 1, 9};
    EXPECT_EQ(parse_idx_labels(lab), (std::vector<std::uint8_t>{7, 1, 9}));
    EXPECT_THROW(parse_idx_labels(fixture()), ParseError);
    EXPECT_THROW(parse_idx_labels(lab.substr(0, 10)), ParseError);
}

TEST(Idx, GzipAndPlainFilesAgree) {
    const auto dir = std::filesystem::temp_directory_path() / "mlcsc_io_test";
    std::filesystem::create_directories(dir);
    const auto plain = (dir / "images-idx3-ubyte").string();
    std::ofstream(plain, std::ios::binary) << fixture();
    const std::string gz = plain + ".gz";
    std::filesystem::remove(gz);
    ASSERT_EQ(std::system(("gzip -k -f " + plain).c_str()), 0);
    EXPECT_EQ(read_idx(plain).pixels, read_idx(gz).pixels);
}

TEST(ModelFile, RoundTripIsByteExact) {
    Rng rng(1);
    const MLCSCModel m = build_random_conv_model(SignalGeometry(24, 2), {{3, 5, 2, 1.0}, {4, 3, 1, 0.5}}, 2, rng);
    const std::string bytes = serialize_model(m);
    const MLCSCModel back = deserialize_model(bytes);
    EXPECT_EQ(serialize_model(back), bytes);
    EXPECT_EQ(back.layers(), m.layers());
    EXPECT_EQ(back.lambdas(), m.lambdas());
    EXPECT_EQ(back.geometry().channels, 2u);
}

TEST(ModelFile, RejectsCorruption) {
    Rng rng(2);
    const MLCSCModel m(SignalGeometry(8, 1), {sparse_random_layer(1, 2, 3, 1, 0, rng)}, {2});
    const std::string bytes = serialize_model(m);
    EXPECT_THROW(deserialize_model(""), ParseError);
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), ParseError);
    EXPECT_THROW(deserialize_model(bytes + "x"), ParseError);
    std::string v2 = bytes;
    v2[12] = '2';
    EXPECT_THROW(deserialize_model(v2), ParseError);
}

TEST(SignalFile, RoundTrip) {
    Rng rng(3);
    std::vector<DenseVec> s;
    for (int i = 0; i < 3; ++i) s.push_back(random_dense(SignalGeometry(5, 2), rng));
    const SignalMatrix m = deserialize_signals(serialize_signals(s));
    EXPECT_EQ(m.rows, 3u);
    EXPECT_EQ(m.cols, 10u);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(m.row(r), s[r].raw());
    const SignalMatrix empty = deserialize_signals(serialize_signals({}, 7));
    EXPECT_EQ(empty.rows, 0u);
    EXPECT_EQ(empty.cols, 7u);
    EXPECT_THROW(deserialize_signals("MLCX"), ParseError);
    EXPECT_THROW(deserialize_signals(serialize_signals(s).substr(0, 40)), ParseError);
}

TEST(Csv, Formatting) {
    CsvWriter csv({"a", "b", "c", "d"});
    csv.row(std::size_t{3}, 0.5, std::numeric_limits<double>::quiet_NaN(), true);
    csv.row(-1, std::numeric_limits<double>::infinity(), std::string("x"), false);
    EXPECT_EQ(csv.str(), "a,b,c,d\n3,0.5,,1\n-1,inf,x,0\n");
    EXPECT_THROW(csv.row(1, 2), DimensionError);

    SparseVec g(SignalGeometry(4, 1));
    g.set(2, 0.1);
    CsvWriter stacks({"sample", "layer", "index", "value"});
    append_stack_rows(stacks, 7, LayerStack{{g}});
    EXPECT_EQ(stacks.str(), "sample,layer,index,value\n7,1,2,0.10000000000000001\n");
}
