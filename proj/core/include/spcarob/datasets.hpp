#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spcarob/numerics.hpp"

namespace spcarob {

// Flattened grayscale images with pixel intensities in [0, 1].
struct LabeledDataset {
    std::string name;
    Mat x;                        // N x D
    std::vector<int> y;           // labels in [0, num_classes)
    std::size_t num_classes = 0;

    std::size_t size() const noexcept { return x.rows(); }
    std::size_t dim() const noexcept { return x.cols(); }

    // Throws if labels or pixel range violate the dataset invariants.
    void validate() const;
    // First min(n, size()) rows, order preserved.
    LabeledDataset head(std::size_t n) const;
    LabeledDataset tail(std::size_t n) const;
};

struct CenteringInfo {
    Vec mean;
};

struct Centered {
    Mat x;
    CenteringInfo info;
};

// MNIST IDX files (big-endian headers, unsigned-byte payload).
// Images are scaled by 1/255 and flattened row-major into 784-vectors.
LabeledDataset load_mnist(const std::filesystem::path& image_path,
                          const std::filesystem::path& label_path,
                          std::size_t expected_count);

struct MnistSplits {
    LabeledDataset train;
    LabeledDataset test;
};
// Standard file names inside `dir`: train-images-idx3-ubyte etc.
MnistSplits load_mnist_dir(const std::filesystem::path& dir);

// ITU-R BT.601 luminance weights.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline constexpr int kCifarAirplane = 0;
inline constexpr int kCifarFrog = 6;
inline constexpr std::size_t kCifarRecordBytes = 3073;

struct CifarBinaryOptions {
    // Total airplane and frog images expected across all files; checked
    // per class. nullopt disables the check (synthetic fixtures).
    std::optional<std::size_t> expected_per_class_total = 6000;
};

struct CifarBinarySplits {
    LabeledDataset train;
    LabeledDataset test;
};

// Airplane (0) vs frog (1) from the CIFAR-10 binary batches, grayscale 32x32.
CifarBinarySplits load_cifar_binary(const std::vector<std::filesystem::path>& batch_paths,
                                    const std::filesystem::path& test_batch_path,
                                    const CifarBinaryOptions& options = {});
// data_batch_1..5.bin and test_batch.bin inside `dir`.
CifarBinarySplits load_cifar_binary_dir(const std::filesystem::path& dir);

// Subtracts column means. Without `info` the means are computed from `x`.
Centered center(Mat x, const std::optional<CenteringInfo>& info = std::nullopt);

// Gaussian blobs rendered as side x side images, clamped to [0, 1]. Used for
// desk-scale runs and tests where the real corpora are not needed.
LabeledDataset synthetic_blobs(std::size_t n, std::size_t side, std::size_t num_classes,
                               std::uint64_t seed, double noise = 0.15);

}  // namespace spcarob
