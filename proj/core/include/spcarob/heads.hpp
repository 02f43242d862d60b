#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "spcarob/numerics.hpp"
#include "spcarob/projection.hpp"

namespace spcarob {

// Affine layer h = W a + b with W stored out x in.
struct DenseLayer {
    Mat w;
    Vec b;

    std::size_t in_dim() const noexcept { return w.cols(); }
    std::size_t out_dim() const noexcept { return w.rows(); }
    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Binary form of a two-class linear head: score uᵀz + bias, label +1 ↔ class 1.
struct BinaryLinear {
    Vec u;
    double bias = 0.0;
};

// Softmax-linear head: logits = Uᵀ z + biases.
struct LinearHead {
    Mat u;       // r x K, column k is the class weight vector u_k
    Vec biases;  // K

    std::size_t input_dim() const noexcept { return u.rows(); }
    std::size_t num_classes() const noexcept { return u.cols(); }
    BinaryLinear binary() const;
    void validate() const;
    friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

// ReLU network; every layer but the last is followed by ReLU.
struct MlpHead {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const noexcept { return layers.front().in_dim(); }
    std::size_t num_classes() const noexcept { return layers.back().out_dim(); }
    void validate() const;
    friend bool operator==(const MlpHead&, const MlpHead&) = default;
};

using Head = std::variant<LinearHead, MlpHead>;

std::string_view head_kind_name(const Head& head);
std::size_t head_input_dim(const Head& head);
std::size_t head_num_classes(const Head& head);

struct TrainConfig {
    int epochs = 20;
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden = {256, 128};

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;      // mean over the epoch, measured before each update
    double accuracy = 0.0;
};

template <class H>
struct Trained {
    H head;
    std::vector<EpochLog> log;
};

// He-uniform hidden layers, zero output layer.
MlpHead init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t num_classes,
                 std::uint64_t seed);

Trained<MlpHead> train_mlp(const Mat& z, std::span<const int> y, std::size_t num_classes, const TrainConfig& config);
// Multinomial logistic regression from zero initialisation, same optimiser.
Trained<LinearHead> fit_linear_head(const Mat& z, std::span<const int> y, std::size_t num_classes,
                                    const TrainConfig& config);

Mat forward(const LinearHead& head, const Mat& z);
Mat forward(const MlpHead& head, const Mat& z);
Mat forward(const Head& head, const Mat& z);
Vec forward(const Head& head, std::span<const double> z);

int argmax(std::span<const double> logits);
double cross_entropy(std::span<const double> logits, int label);
double mean_loss(const Head& head, const Mat& z, std::span<const int> y);
double accuracy(const Head& head, const Mat& z, std::span<const int> y);

// Cross-entropy and its gradient with respect to the head's input features.
double loss_and_feature_gradient(const Head& head, std::span<const double> z, int label, Vec& grad_z);

// ∇_x ℓ(C(Wx + b), y) = Wᵀ ∇_z ℓ. Optionally reports the loss.
Vec input_gradient(const Head& head, const ProjectionModel& projection, std::span<const double> x, int label,
                   double* loss = nullptr);

// Mean batch cross-entropy and the gradient of every parameter; `grads`
// is reshaped to match `head`.
double loss_and_parameter_gradients(const MlpHead& head, const Mat& z, std::span<const int> y, MlpHead& grads);
double loss_and_parameter_gradients(const LinearHead& head, const Mat& z, std::span<const int> y, LinearHead& grads);

// Product of layer spectral norms; ReLU is 1-Lipschitz so this bounds L_C.
double lipschitz_upper_bound(const MlpHead& head);
double lipschitz_upper_bound(const LinearHead& head);
double lipschitz_upper_bound(const Head& head);

}  // namespace spcarob
