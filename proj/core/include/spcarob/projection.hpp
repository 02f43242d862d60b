#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spcarob/datasets.hpp"
#include "spcarob/numerics.hpp"

namespace spcarob {

enum class ProjectionKind { Pca, Spca };

std::string_view to_string(ProjectionKind kind);
ProjectionKind parse_projection_kind(std::string_view text);

// Entries with magnitude below this count as structural zeros.
inline constexpr double kZeroThreshold = 1e-12;

// Affine feature map z = W x + b, with b = -W x̄ for a fitted model.
struct ProjectionModel {
    ProjectionKind kind = ProjectionKind::Pca;
    Mat w;                       // r x D, one loading vector per row
    Vec b;                       // length r
    Vec explained_variance;      // per component, on the (deflated) covariance
    std::vector<bool> converged; // per component; always true for PCA
    std::vector<std::string> warnings;
    double density = 1.0;        // fraction of nonzero entries of W
    Vec col_norms;               // ‖w_j‖₂ for each input coordinate j

    std::size_t components() const noexcept { return w.rows(); }
    std::size_t input_dim() const noexcept { return w.cols(); }

    // Builds a model around a given W and b and fills in the statistics.
    static ProjectionModel from_matrix(ProjectionKind kind, Mat w, Vec b);
    void refresh_stats();

    Vec apply(std::span<const double> x) const;
};

ProjectionModel fit_pca(const Mat& x_centered, const CenteringInfo& info, std::size_t r);
// Reuses an eigendecomposition of the covariance (e.g. across several r).
ProjectionModel fit_pca(const SymEig& covariance_eig, const CenteringInfo& info, std::size_t r);

// S = (1/N) XcᵀXc for already-centred data.
Mat covariance(const Mat& x_centered);

struct SpcaOptions {
    // Fraction of nonzero loadings per component. Ignored when
    // row_l1_budget is set.
    double target_density = 0.05;
    // Alternative sparsity knob: ‖W_j‖₁ ≤ budget for every unit-norm row,
    // with the threshold found by bisection at each iteration.
    std::optional<double> row_l1_budget;
    int max_iters = 300;
    double tol = 1e-10;
    // Coordinate starts tried per component (largest remaining variances),
    // in addition to one dense power-iteration start.
    std::size_t max_starts = 8;
    // Support-exchange refinement runs when |support| x |outside| is at
    // most this many restricted eigenproblems.
    std::size_t max_swap_evals = 2048;
};

ProjectionModel fit_spca(const Mat& x_centered, const CenteringInfo& info, std::size_t r,
                         const SpcaOptions& options = {});
ProjectionModel fit_spca_from_covariance(const Mat& s, const CenteringInfo& info, std::size_t r,
                                         const SpcaOptions& options = {});

// Row i of the result is W x_i + b.
Mat project(const ProjectionModel& model, const Mat& x);

// First r rows of a fitted model. Both fits extract components greedily, so
// this equals refitting with r components.
ProjectionModel leading_components(const ProjectionModel& model, std::size_t r);

struct SparsityReport {
    double density = 0.0;
    std::vector<std::size_t> row_nonzeros;
    Vec col_norms;
    double col_norm_sum = 0.0;
    double col_norm_max = 0.0;
    double spectral_norm = 0.0;
    double l1_mass = 0.0;  // Σ|W_ij|, the α achieved by the model
};

SparsityReport sparsity_report(const ProjectionModel& model);

}  // namespace spcarob
