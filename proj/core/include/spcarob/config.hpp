#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <string>
#include <vector>

#include "spcarob/attacks.hpp"
#include "spcarob/certificates.hpp"
#include "spcarob/datasets.hpp"
#include "spcarob/heads.hpp"
#include "spcarob/projection.hpp"

namespace spcarob {

inline constexpr std::size_t kNoLimit = std::numeric_limits<std::size_t>::max();

std::vector<double> default_epsilon_grid();  // 0.01, 0.02, ..., 0.20

// Flat key=value settings. List keys (projection, r, hidden, attack, norm,
// epsilon, seed) may repeat; the first occurrence replaces the default list.
struct ExperimentConfig {
    std::string dataset = "mnist";  // mnist | cifar-binary | synthetic
    std::vector<ProjectionKind> projections = {ProjectionKind::Pca, ProjectionKind::Spca};
    std::vector<std::size_t> components = {100, 125, 150, 175, 200};
    double density = 0.05;
    std::string head = "mlp";  // mlp | linear
    TrainConfig train;
    std::vector<AttackKind> attacks = {AttackKind::Fgsm, AttackKind::Pgd, AttackKind::Mim, AttackKind::Square};
    std::vector<Norm> norms = {Norm::Linf, Norm::L2};
    std::vector<double> epsilons = default_epsilon_grid();
    std::vector<std::uint64_t> seeds = {0};
    std::filesystem::path out_dir = "out";

    std::size_t limit = kNoLimit;        // test points per cell
    std::size_t train_limit = kNoLimit;  // training points
    bool clip = true;
    int square_budget = 5000;

    std::filesystem::path mnist_dir = "data/mnist";
    std::filesystem::path cifar_dir = "data/cifar-10-batches-bin";

    std::size_t synthetic_train = 600;
    std::size_t synthetic_test = 200;
    std::size_t synthetic_side = 8;
    std::size_t synthetic_classes = 3;
    double synthetic_noise = 0.15;

    void validate() const;
    // Canonical text form; parse_config(to_text()) reproduces the config.
    std::string to_text() const;
};

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

struct ExperimentData {
    LabeledDataset train;
    LabeledDataset test;
};

// Loads the configured dataset; train_limit is applied, limit is not.
ExperimentData load_experiment_data(const ExperimentConfig& config);

}  // namespace spcarob
