#include <gtest/gtest.h>

#include <cmath>

#include "spcarob/datasets.hpp"
#include "spcarob/error.hpp"
#include "test_support.hpp"

using namespace spcarob;
using spcarob::testing::put_be32;
using spcarob::testing::TempDir;
using spcarob::testing::write_bytes;

namespace {

struct IdxPair {
    std::vector<std::uint8_t> images;
    std::vector<std::uint8_t> labels;
};

IdxPair make_idx(std::uint32_t count, std::uint32_t rows, std::uint32_t cols, std::uint64_t seed) {
    IdxPair f;
    put_be32(f.images, 0x803);
    put_be32(f.images, count);
    put_be32(f.images, rows);
    put_be32(f.images, cols);
    put_be32(f.labels, 0x801);
    put_be32(f.labels, count);
    SeededRng rng(seed);
    for (std::uint32_t i = 0; i < count * rows * cols; ++i) f.images.push_back(static_cast<std::uint8_t>(rng.below(256)));
    for (std::uint32_t i = 0; i < count; ++i) f.labels.push_back(static_cast<std::uint8_t>(rng.below(10)));
    return f;
}

std::vector<std::uint8_t> cifar_record(std::uint8_t label, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::vector<std::uint8_t> rec{label};
    rec.insert(rec.end(), 1024, r);
    rec.insert(rec.end(), 1024, g);
    rec.insert(rec.end(), 1024, b);
    return rec;
}

}  // namespace

TEST(Mnist, WriterRoundTripPixelForPixel) {
    TempDir dir;
    const auto f = make_idx(2, 28, 28, 11);
    write_bytes(dir / "img", f.images);
    write_bytes(dir / "lbl", f.labels);
    const auto ds = load_mnist(dir / "img", dir / "lbl", 2);
    ASSERT_EQ(ds.size(), 2u);
    ASSERT_EQ(ds.dim(), 784u);
    EXPECT_EQ(ds.num_classes, 10u);
    for (std::size_t i = 0; i < 2 * 784; ++i) EXPECT_EQ(ds.x.values()[i], f.images[16 + i] / 255.0);
    EXPECT_EQ(ds.y[0], f.labels[8]);
    EXPECT_EQ(ds.y[1], f.labels[9]);
    EXPECT_NO_THROW(ds.validate());
}

TEST(Mnist, Errors) {
    TempDir dir;
    auto f = make_idx(3, 4, 4, 1);
    write_bytes(dir / "lbl", f.labels);

    auto bad = f.images;
    bad[3] = 0x04;
    write_bytes(dir / "img", bad);
    EXPECT_THROW(load_mnist(dir / "img", dir / "lbl", 3), FormatError);

    write_bytes(dir / "img", f.images);
    EXPECT_THROW(load_mnist(dir / "img", dir / "lbl", 4), CountError);

    write_bytes(dir / "img", std::vector<std::uint8_t>(f.images.begin(), f.images.begin() + 16));
    EXPECT_THROW(load_mnist(dir / "img", dir / "lbl", 3), TruncationError);

    write_bytes(dir / "img", std::vector<std::uint8_t>(f.images.begin(), f.images.begin() + 6));
    EXPECT_THROW(load_mnist(dir / "img", dir / "lbl", 3), TruncationError);

    EXPECT_THROW(load_mnist(dir / "missing", dir / "lbl", 3), IoError);
}

TEST(Cifar, EqualChannelsGiveThatGray) {
    TempDir dir;
    write_bytes(dir / "b1", cifar_record(0, 120, 120, 120));
    write_bytes(dir / "t", cifar_record(6, 120, 120, 120));
    CifarBinaryOptions opts;
    opts.expected_per_class_total = std::nullopt;
    const auto s = load_cifar_binary({dir / "b1"}, dir / "t", opts);
    ASSERT_EQ(s.train.size(), 1u);
    ASSERT_EQ(s.train.dim(), 1024u);
    for (double v : s.train.x.values()) EXPECT_NEAR(v, 120.0 / 255.0, 1e-15);
    EXPECT_EQ(s.train.y[0], 0);
    EXPECT_EQ(s.test.y[0], 1);
}

TEST(Cifar, LuminanceFormula) {
    TempDir dir;
    write_bytes(dir / "b1", cifar_record(6, 200, 17, 90));
    write_bytes(dir / "t", cifar_record(0, 0, 255, 3));
    CifarBinaryOptions opts;
    opts.expected_per_class_total = std::nullopt;
    const auto s = load_cifar_binary({dir / "b1"}, dir / "t", opts);
    const double want_train = (0.299 * 200 + 0.587 * 17 + 0.114 * 90) / 255.0;
    const double want_test = (0.587 * 255 + 0.114 * 3) / 255.0;
    EXPECT_NEAR(s.train.x(0, 517), want_train, 1e-12);
    EXPECT_NEAR(s.test.x(0, 0), want_test, 1e-12);
}

TEST(Cifar, KeepsOnlyAirplaneAndFrogAndChecksCounts) {
    TempDir dir;
    std::vector<std::uint8_t> batch;
    for (std::uint8_t label : {0, 1, 6, 3, 0, 9}) {
        const auto rec = cifar_record(label, label, label, label);
        batch.insert(batch.end(), rec.begin(), rec.end());
    }
    write_bytes(dir / "b1", batch);
    write_bytes(dir / "t", cifar_record(6, 1, 2, 3));
    CifarBinaryOptions opts;
    opts.expected_per_class_total = 2;
    const auto s = load_cifar_binary({dir / "b1"}, dir / "t", opts);
    EXPECT_EQ(s.train.size(), 3u);
    EXPECT_EQ(s.train.y, (std::vector<int>{0, 1, 0}));

    opts.expected_per_class_total = 6000;
    EXPECT_THROW(load_cifar_binary({dir / "b1"}, dir / "t", opts), CountError);

    batch.pop_back();
    write_bytes(dir / "b1", batch);
    EXPECT_THROW(load_cifar_binary({dir / "b1"}, dir / "t", opts), FormatError);
}

TEST(Center, IdenticalRowsGiveZeros) {
    const Mat x = Mat::from_rows({{0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}});
    const auto c = center(x);
    for (double v : c.x.values()) EXPECT_NEAR(v, 0.0, 1e-15);
    EXPECT_NEAR(c.info.mean[0], 0.1, 1e-15);
    EXPECT_NEAR(c.info.mean[2], 0.3, 1e-15);
}

TEST(Center, TrainingPathHasZeroColumnMeans) {
    SeededRng rng(4);
    const Mat x = spcarob::testing::random_mat(rng, 50, 6, 0.0, 1.0);
    const auto c = center(x);
    for (std::size_t j = 0; j < 6; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < 50; ++i) m += c.x(i, j);
        EXPECT_NEAR(m / 50.0, 0.0, 1e-10);
    }
}

TEST(Center, HeldOutRowsUseTrainMean) {
    const Mat train = Mat::from_rows({{0, 1, 2, 3}, {2, 3, 4, 5}});
    const Mat test = Mat::from_rows({{1, 1, 1, 1}, {0, 0, 0, 0}, {5, 6, 7, 8}});
    const auto info = center(train).info;
    const auto c = center(test, info);
    const double mean[] = {1, 2, 3, 4};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(c.x(i, j), test(i, j) - mean[j]);
    CenteringInfo wrong{Vec(3, 0.0)};
    EXPECT_THROW(center(test, wrong), DimensionError);
}

TEST(Dataset, ValidateAndSlices) {
    auto ds = synthetic_blobs(30, 4, 3, 1);
    EXPECT_NO_THROW(ds.validate());
    const auto h = ds.head(10);
    const auto t = ds.tail(5);
    EXPECT_EQ(h.size(), 10u);
    EXPECT_EQ(t.size(), 5u);
    EXPECT_EQ(t.y[4], ds.y[29]);
    EXPECT_EQ(t.x(0, 3), ds.x(25, 3));
    ds.y[0] = 7;
    EXPECT_THROW(ds.validate(), ParameterError);
}
