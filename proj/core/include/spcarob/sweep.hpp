#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "spcarob/config.hpp"
#include "spcarob/heads.hpp"
#include "spcarob/projection.hpp"
#include "spcarob/report.hpp"

namespace spcarob {

using ProgressFn = std::function<void(std::string_view)>;

struct Pipeline {
    ProjectionModel projection;
    Head head;
    std::vector<EpochLog> log;
};

// Centers the training data and fits r components of the given kind.
ProjectionModel fit_projection(ProjectionKind kind, const LabeledDataset& train, std::size_t r, double density);

Head train_head(std::string_view head_kind, const ProjectionModel& projection, const LabeledDataset& train,
                const TrainConfig& config, std::vector<EpochLog>* log = nullptr);

// Attack settings for one sweep cell.
AttackConfig cell_attack_config(const ExperimentConfig& config, AttackKind kind, Norm p, double epsilon,
                                std::uint64_t seed);

// Rows for one fitted (projection, head) pair: clean, then every
// (attack, norm, ε), then certified rows for linear heads.
ResultTable evaluate_pipeline(const ExperimentConfig& config, const Pipeline& pipeline, const LabeledDataset& test,
                              std::uint64_t seed, const ProgressFn& progress = {});

ResultTable run_sweep(const ExperimentConfig& config, const ExperimentData& data, const ProgressFn& progress = {});
ResultTable run_sweep(const ExperimentConfig& config, const ProgressFn& progress = {});

}  // namespace spcarob
