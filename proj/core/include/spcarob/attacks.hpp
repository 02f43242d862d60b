#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spcarob/certificates.hpp"
#include "spcarob/datasets.hpp"
#include "spcarob/heads.hpp"
#include "spcarob/numerics.hpp"
#include "spcarob/projection.hpp"

namespace spcarob {

// Score-only access to a classifier; this is all the Square attack sees.
class ScoreOracle {
public:
    virtual ~ScoreOracle() = default;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t num_classes() const = 0;
    virtual Vec logits(std::span<const double> x) const = 0;
    int predict(std::span<const double> x) const;
};

class DifferentiableClassifier : public ScoreOracle {
public:
    // Cross-entropy at x and its gradient with respect to x.
    virtual double loss_and_gradient(std::span<const double> x, int label, Vec& grad) const = 0;
};

// h(x) = C(Wx + b). Holds references; both parts must outlive it. Linear
// heads are folded into a single D x K map.
class ProjectedClassifier final : public DifferentiableClassifier {
public:
    ProjectedClassifier(const ProjectionModel& projection, const Head& head);

    std::size_t input_dim() const override { return projection_.input_dim(); }
    std::size_t num_classes() const override { return head_num_classes(head_); }
    Vec logits(std::span<const double> x) const override;
    double loss_and_gradient(std::span<const double> x, int label, Vec& grad) const override;

private:
    const ProjectionModel& projection_;
    const Head& head_;
    std::optional<Mat> fused_;  // (WᵀU)ᵀ, K x D
    Vec fused_bias_;
};

enum class AttackKind { Fgsm, Pgd, Mim, Square };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view text);

struct AttackConfig {
    AttackKind kind = AttackKind::Fgsm;
    ThreatModel threat;
    int steps = 1;              // PGD: 40, MIM: 20
    double step_divisor = 1.0;  // α = ε / step_divisor (PGD: 4, MIM: 5)
    double momentum = 1.0;      // MIM μ
    int query_budget = 5000;    // Square
    double square_p_init = 0.3; // Square: initial window area fraction
    std::uint64_t seed = 0;
    bool clip_to_unit_box = true;

    // Defaults for each attack at the given threat model.
    static AttackConfig defaults(AttackKind kind, ThreatModel threat);
    double step_size() const { return threat.epsilon / step_divisor; }
    void validate() const;
};

struct AttackResult {
    Vec x_adv;
    bool success = false;        // prediction on x_adv differs from the label
    int predicted = 0;
    int queries = 0;             // model evaluations spent
    double perturbation_norm = 0.0;  // in the threat norm
    double loss = 0.0;           // cross-entropy at x_adv (white-box attacks)
    bool zero_gradient = false;
};

// Per-step state exposed for testing the momentum recursion.
struct MimTrace {
    std::vector<Vec> velocity;  // g^(t+1) after each step
    std::vector<Vec> iterates;  // x^(t+1) after projection and clipping
};

// Margin loss logit_y - max_{k≠y} logit_k after each accepted proposal.
struct SquareTrace {
    std::vector<double> accepted_margins;
};

AttackResult fgsm(const DifferentiableClassifier& model, std::span<const double> x, int label,
                  const AttackConfig& config);
AttackResult pgd(const DifferentiableClassifier& model, std::span<const double> x, int label,
                 const AttackConfig& config, std::vector<Vec>* iterates = nullptr);
AttackResult mim(const DifferentiableClassifier& model, std::span<const double> x, int label,
                 const AttackConfig& config, MimTrace* trace = nullptr);
// ℓ∞ only; the input must be a flattened square image.
AttackResult square_attack(const ScoreOracle& model, std::span<const double> x, int label,
                           const AttackConfig& config, SquareTrace* trace = nullptr);

AttackResult run_attack(const DifferentiableClassifier& model, std::span<const double> x, int label,
                        const AttackConfig& config);

// Per-example seeds are derived from config.seed and the example index, so
// the result does not depend on evaluation order.
std::uint64_t example_seed(const AttackConfig& config, std::size_t index);

struct RobustEvaluation {
    double accuracy = 0.0;
    double clean_accuracy = 0.0;
    std::size_t n = 0;
    std::size_t attack_successes = 0;
};

// Fraction of points that are classified correctly both before and after
// the attack.
RobustEvaluation robust_accuracy(const DifferentiableClassifier& model, const LabeledDataset& data,
                                 const AttackConfig& config,
                                 std::size_t limit = std::numeric_limits<std::size_t>::max());
RobustEvaluation robust_accuracy(const ProjectionModel& projection, const Head& head, const LabeledDataset& data,
                                 const AttackConfig& config,
                                 std::size_t limit = std::numeric_limits<std::size_t>::max());

// Helpers shared with tests.
double threat_norm(std::span<const double> delta, Norm p);
double margin_loss(std::span<const double> logits, int label);

}  // namespace spcarob
