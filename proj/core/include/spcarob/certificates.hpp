#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spcarob/datasets.hpp"
#include "spcarob/heads.hpp"
#include "spcarob/numerics.hpp"
#include "spcarob/projection.hpp"

namespace spcarob {

enum class Norm { Linf, L2 };

std::string_view to_string(Norm p);  // "inf" or "2"
Norm parse_norm(std::string_view text);

struct ThreatModel {
    Norm p = Norm::Linf;
    double epsilon = 0.0;  // pixel units on the [0, 1] scale

    void validate() const;
};

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

struct DualNorms {
    double l1 = 0.0;  // pairs with ℓ∞ perturbations
    double l2 = 0.0;  // pairs with ℓ2 perturbations

    double for_threat(Norm p) const noexcept { return p == Norm::Linf ? l1 : l2; }
};

// (‖Wᵀv‖₁, ‖Wᵀv‖₂)
DualNorms dual_norms(const Mat& w, std::span<const double> v);

// Signed margin y(uᵀ(Wx + b_proj) + b_head) for y ∈ {-1, +1}.
double binary_margin(const ProjectionModel& projection, const BinaryLinear& head, std::span<const double> x, int y);

// m(x) / ‖Wᵀu‖_dual, 0 when m(x) ≤ 0, +inf when the dual norm vanishes.
double certified_radius_binary(const ProjectionModel& projection, const BinaryLinear& head,
                               std::span<const double> x, int y, Norm p);

struct MulticlassCertificate {
    int predicted = 0;
    double radius = 0.0;
    double margin = 0.0;     // smallest pairwise margin γ_k(x)
    double dual_norm = 0.0;  // dual norm of the pair that binds the radius
};

// Precomputes ‖Wᵀ(u_a - u_b)‖ for every class pair so each example costs one
// forward pass.
class LinearCertifier {
public:
    LinearCertifier(const ProjectionModel& projection, const LinearHead& head);

    MulticlassCertificate certify(std::span<const double> x, Norm p) const;
    double pair_dual_norm(std::size_t a, std::size_t b, Norm p) const;

private:
    const ProjectionModel& projection_;
    const LinearHead& head_;
    std::size_t k_;
    std::vector<DualNorms> pairs_;  // k x k
};

MulticlassCertificate certified_radius_multiclass(const ProjectionModel& projection, const LinearHead& head,
                                                  std::span<const double> x, Norm p);

struct CertificateRecord {
    std::size_t index = 0;
    int clean_pred = 0;
    int label = 0;
    double margin = 0.0;
    double dual_norm = 0.0;
    double radius = 0.0;
    Norm p = Norm::Linf;
    bool correct = false;
};

// Radius is forced to 0 for misclassified points. Heads other than linear
// are rejected with UnsupportedHeadError.
std::vector<CertificateRecord> certify_dataset(const ProjectionModel& projection, const Head& head,
                                               const LabeledDataset& data, Norm p,
                                               std::size_t limit = std::numeric_limits<std::size_t>::max());

struct CurvePoint {
    double epsilon = 0.0;
    double accuracy = 0.0;
};

// Fraction of points that are correct with certified radius > ε.
std::vector<CurvePoint> certified_accuracy_curve(const std::vector<CertificateRecord>& records,
                                                 std::span<const double> epsilons);
std::vector<CurvePoint> certified_accuracy_curve(const ProjectionModel& projection, const Head& head,
                                                 const LabeledDataset& data, Norm p,
                                                 std::span<const double> epsilons,
                                                 std::size_t limit = std::numeric_limits<std::size_t>::max());

// Exhaustive max over δ ∈ {±1}^D of ‖Wδ‖₂. D ≤ 20.
inline constexpr std::size_t kMaxExactInfTo2Dim = 20;
double exact_inf_to_2_norm(const Mat& w);

struct OperatorNormDiagnostics {
    double col_norm_max = 0.0;
    double col_norm_sum = 0.0;
    double spectral = 0.0;
    double sqrt_d_spectral = 0.0;
    std::optional<double> exact_inf_to_2;
};

OperatorNormDiagnostics operator_norm_diagnostics(const Mat& w, bool exact = false);

struct SensitivityBound {
    double head_lipschitz = 0.0;
    double l2 = 0.0;    // L_C ‖W‖₂→₂
    double linf = 0.0;  // L_C Σ_j ‖w_j‖₂, upper surrogate for ‖W‖∞→₂
};

SensitivityBound sensitivity_bound(const ProjectionModel& projection, const Head& head);

}  // namespace spcarob
