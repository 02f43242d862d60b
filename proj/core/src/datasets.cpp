#include "spcarob/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "spcarob/error.hpp"
#include "spcarob/rng.hpp"

namespace spcarob {

namespace fs = std::filesystem;

void LabeledDataset::validate() const {
    if (x.rows() == 0) throw CountError(fmt::format("dataset '{}' is empty", name));
    if (y.size() != x.rows())
        throw DimensionError(fmt::format("dataset '{}': {} rows but {} labels", name, x.rows(), y.size()));
    for (int label : y)
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            throw ParameterError(fmt::format("dataset '{}': label {} outside [0, {})", name, label, num_classes));
    for (double v : x.values())
        if (!(v >= 0.0 && v <= 1.0))
            throw ParameterError(fmt::format("dataset '{}': pixel {} outside [0, 1]", name, v));
}

LabeledDataset LabeledDataset::head(std::size_t n) const {
    n = std::min(n, size());
    LabeledDataset out;
    out.name = name;
    out.num_classes = num_classes;
    out.x = Mat(n, dim());
    std::copy_n(x.values().begin(), n * dim(), out.x.values().begin());
    out.y.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

LabeledDataset LabeledDataset::tail(std::size_t n) const {
    n = std::min(n, size());
    const std::size_t first = size() - n;
    LabeledDataset out;
    out.name = name;
    out.num_classes = num_classes;
    out.x = Mat(n, dim());
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(first * dim()), n * dim(), out.x.values().begin());
    out.y.assign(y.begin() + static_cast<std::ptrdiff_t>(first), y.end());
    return out;
}

namespace {

std::vector<unsigned char> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const fs::path& path) {
    if (offset + 4 > bytes.size())
        throw TruncationError(fmt::format("'{}': header truncated at byte {}", path.string(), bytes.size()));
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

LabeledDataset load_mnist(const fs::path& image_path, const fs::path& label_path, std::size_t expected_count) {
    const auto images = read_file(image_path);
    const auto labels = read_file(label_path);

    if (const auto magic = read_be32(images, 0, image_path); magic != kIdxImagesMagic)
        throw FormatError(fmt::format("'{}': magic {:#010x}, expected {:#010x}", image_path.string(), magic,
                                      kIdxImagesMagic));
    if (const auto magic = read_be32(labels, 0, label_path); magic != kIdxLabelsMagic)
        throw FormatError(fmt::format("'{}': magic {:#010x}, expected {:#010x}", label_path.string(), magic,
                                      kIdxLabelsMagic));

    const std::size_t count = read_be32(images, 4, image_path);
    const std::size_t rows = read_be32(images, 8, image_path);
    const std::size_t cols = read_be32(images, 12, image_path);
    const std::size_t label_count = read_be32(labels, 4, label_path);
    if (count != expected_count)
        throw CountError(fmt::format("'{}': declares {} images, expected {}", image_path.string(), count,
                                     expected_count));
    if (label_count != expected_count)
        throw CountError(fmt::format("'{}': declares {} labels, expected {}", label_path.string(), label_count,
                                     expected_count));

    const std::size_t dim = rows * cols;
    if (images.size() < 16 + count * dim)
        throw TruncationError(fmt::format("'{}': {} payload bytes, expected {}", image_path.string(),
                                          images.size() - 16, count * dim));
    if (labels.size() < 8 + count)
        throw TruncationError(fmt::format("'{}': {} payload bytes, expected {}", label_path.string(),
                                          labels.size() - 8, count));

    LabeledDataset ds;
    ds.name = "mnist";
    ds.num_classes = 10;
    ds.x = Mat(count, dim);
    ds.y.resize(count);
    auto values = ds.x.values();
    for (std::size_t i = 0; i < count * dim; ++i) values[i] = images[16 + i] / 255.0;
    for (std::size_t i = 0; i < count; ++i) {
        ds.y[i] = labels[8 + i];
        if (ds.y[i] >= 10) throw FormatError(fmt::format("'{}': label {} at index {}", label_path.string(), ds.y[i], i));
    }
    return ds;
}

MnistSplits load_mnist_dir(const fs::path& dir) {
    MnistSplits s{load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", 60000),
                  load_mnist(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", 10000)};
    s.train.name = "mnist";
    s.test.name = "mnist";
    return s;
}

namespace {

struct CifarCounts {
    std::size_t airplane = 0;
    std::size_t frog = 0;
};

void append_cifar_file(const fs::path& path, std::vector<Vec>& rows, std::vector<int>& labels, CifarCounts& counts) {
    const auto bytes = read_file(path);
    if (bytes.size() % kCifarRecordBytes != 0)
        throw FormatError(fmt::format("'{}': {} bytes is not a multiple of the {}-byte record", path.string(),
                                      bytes.size(), kCifarRecordBytes));
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* rec = bytes.data() + i * kCifarRecordBytes;
        const int label = rec[0];
        if (label != kCifarAirplane && label != kCifarFrog) continue;
        const unsigned char* red = rec + 1;
        const unsigned char* green = red + 1024;
        const unsigned char* blue = green + 1024;
        Vec gray(1024);
        for (std::size_t p = 0; p < 1024; ++p)
            gray[p] = (kLumaR * red[p] + kLumaG * green[p] + kLumaB * blue[p]) / 255.0;
        rows.push_back(std::move(gray));
        labels.push_back(label == kCifarAirplane ? 0 : 1);
        (label == kCifarAirplane ? counts.airplane : counts.frog) += 1;
    }
}

LabeledDataset make_cifar_dataset(const std::vector<Vec>& rows, std::vector<int> labels) {
    LabeledDataset ds;
    ds.name = "cifar-binary";
    ds.num_classes = 2;
    ds.x = rows.empty() ? Mat(0, 1024) : Mat::from_rows(rows);
    ds.y = std::move(labels);
    return ds;
}

}  // namespace

CifarBinarySplits load_cifar_binary(const std::vector<fs::path>& batch_paths, const fs::path& test_batch_path,
                                    const CifarBinaryOptions& options) {
    CifarCounts counts;
    std::vector<Vec> train_rows;
    std::vector<int> train_labels;
    for (const auto& p : batch_paths) append_cifar_file(p, train_rows, train_labels, counts);
    std::vector<Vec> test_rows;
    std::vector<int> test_labels;
    append_cifar_file(test_batch_path, test_rows, test_labels, counts);

    if (options.expected_per_class_total) {
        const std::size_t want = *options.expected_per_class_total;
        if (counts.airplane != want || counts.frog != want)
            throw CountError(fmt::format("CIFAR binary: found {} airplane and {} frog images, expected {} each",
                                         counts.airplane, counts.frog, want));
    }
    return {make_cifar_dataset(train_rows, std::move(train_labels)),
            make_cifar_dataset(test_rows, std::move(test_labels))};
}

CifarBinarySplits load_cifar_binary_dir(const fs::path& dir) {
    std::vector<fs::path> batches;
    for (int i = 1; i <= 5; ++i) batches.push_back(dir / fmt::format("data_batch_{}.bin", i));
    return load_cifar_binary(batches, dir / "test_batch.bin");
}

Centered center(Mat x, const std::optional<CenteringInfo>& info) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    CenteringInfo ci;
    if (info) {
        if (info->mean.size() != d)
            throw DimensionError(fmt::format("center: mean has length {}, data has {} columns", info->mean.size(), d));
        ci = *info;
    } else {
        ci.mean.assign(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) axpy(1.0, x.row(i), ci.mean);
        if (n > 0)
            for (double& m : ci.mean) m /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) axpy(-1.0, ci.mean, x.row(i));
    return {std::move(x), std::move(ci)};
}

LabeledDataset synthetic_blobs(std::size_t n, std::size_t side, std::size_t num_classes, std::uint64_t seed,
                               double noise) {
    if (num_classes < 2 || side == 0) throw ParameterError("synthetic_blobs: need >= 2 classes and side > 0");
    SeededRng rng(seed);
    const std::size_t d = side * side;

    // Each class prototype is a sum of three Gaussian bumps.
    std::vector<Vec> prototypes(num_classes, Vec(d, 0.0));
    for (auto& proto : prototypes) {
        for (int bump = 0; bump < 3; ++bump) {
            const double cy = rng.uniform(0.0, static_cast<double>(side));
            const double cx = rng.uniform(0.0, static_cast<double>(side));
            const double width = rng.uniform(0.08, 0.2) * static_cast<double>(side);
            for (std::size_t r = 0; r < side; ++r)
                for (std::size_t c = 0; c < side; ++c) {
                    const double dy = static_cast<double>(r) + 0.5 - cy;
                    const double dx = static_cast<double>(c) + 0.5 - cx;
                    proto[r * side + c] += 0.8 * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
                }
        }
    }

    LabeledDataset ds;
    ds.name = "synthetic";
    ds.num_classes = num_classes;
    ds.x = Mat(n, d);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto label = static_cast<int>(rng.below(num_classes));
        ds.y[i] = label;
        auto row = ds.x.row(i);
        for (std::size_t j = 0; j < d; ++j)
            row[j] = std::clamp(prototypes[static_cast<std::size_t>(label)][j] + rng.normal(0.0, noise), 0.0, 1.0);
    }
    return ds;
}

}  // namespace spcarob
