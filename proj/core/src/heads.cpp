#include "spcarob/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "spcarob/error.hpp"
#include "spcarob/rng.hpp"

namespace spcarob {

BinaryLinear LinearHead::binary() const {
    if (num_classes() != 2)
        throw ParameterError(fmt::format("binary view needs K = 2, head has K = {}", num_classes()));
    BinaryLinear out;
    out.u.resize(input_dim());
    for (std::size_t i = 0; i < input_dim(); ++i) out.u[i] = u(i, 1) - u(i, 0);
    out.bias = biases[1] - biases[0];
    return out;
}

void LinearHead::validate() const {
    if (num_classes() < 2) throw ParameterError("linear head needs at least two classes");
    if (biases.size() != num_classes())
        throw DimensionError(fmt::format("linear head: {} biases for {} classes", biases.size(), num_classes()));
    if (!u.all_finite()) throw ParameterError("linear head has non-finite weights");
}

void MlpHead::validate() const {
    if (layers.empty()) throw ParameterError("MLP head has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].b.size() != layers[l].out_dim())
            throw DimensionError(fmt::format("MLP layer {}: bias length {} for {} outputs", l, layers[l].b.size(),
                                             layers[l].out_dim()));
        if (l > 0 && layers[l].in_dim() != layers[l - 1].out_dim())
            throw DimensionError(fmt::format("MLP layer {} takes {} inputs but layer {} emits {}", l,
                                             layers[l].in_dim(), l - 1, layers[l - 1].out_dim()));
        if (!layers[l].w.all_finite()) throw ParameterError(fmt::format("MLP layer {} has non-finite weights", l));
    }
}

std::string_view head_kind_name(const Head& head) {
    return std::holds_alternative<LinearHead>(head) ? "linear" : "mlp";
}

std::size_t head_input_dim(const Head& head) {
    return std::visit([](const auto& h) { return h.input_dim(); }, head);
}

std::size_t head_num_classes(const Head& head) {
    return std::visit([](const auto& h) { return h.num_classes(); }, head);
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ParameterError(fmt::format("epochs must be non-negative, got {}", epochs));
    if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (batch_size == 0) throw ParameterError("batch size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0))
        throw ParameterError("Adam parameters out of range");
    for (std::size_t h : hidden)
        if (h == 0) throw ParameterError("hidden layer width must be positive");
}

int argmax(std::span<const double> logits) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

namespace {

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Writes softmax(v) - onehot(label) into `out` and returns the loss.
double softmax_residual(std::span<const double> logits, int label, std::span<double> out) {
    const double lse = log_sum_exp(logits);
    for (std::size_t k = 0; k < logits.size(); ++k) out[k] = std::exp(logits[k] - lse);
    out[static_cast<std::size_t>(label)] -= 1.0;
    return lse - logits[static_cast<std::size_t>(label)];
}

void check_labels(const Mat& z, std::span<const int> y, std::size_t num_classes) {
    if (z.rows() != y.size())
        throw DimensionError(fmt::format("{} feature rows but {} labels", z.rows(), y.size()));
    for (int label : y)
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            throw ParameterError(fmt::format("label {} outside [0, {})", label, num_classes));
}

struct Tape {
    std::vector<Mat> inputs;  // input to each layer
    std::vector<Mat> pre;     // pre-activation of each layer
};

Mat forward_stack(const std::vector<DenseLayer>& layers, const Mat& z, Tape* tape) {
    Mat a = z;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Mat h = matmul(a, layers[l].w.transposed());
        for (std::size_t i = 0; i < h.rows(); ++i) axpy(1.0, layers[l].b, h.row(i));
        if (tape) {
            tape->inputs.push_back(std::move(a));
            tape->pre.push_back(h);
        }
        if (l + 1 < layers.size())
            for (double& v : h.values()) v = std::max(v, 0.0);
        a = std::move(h);
    }
    return a;
}

// Mean cross-entropy over the batch; `dlogits` receives its gradient.
double batch_loss(const Mat& logits, std::span<const int> y, Mat& dlogits, std::size_t* correct) {
    dlogits = Mat(logits.rows(), logits.cols());
    const double inv = 1.0 / static_cast<double>(logits.rows());
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        loss += softmax_residual(logits.row(i), y[i], dlogits.row(i));
        for (double& g : dlogits.row(i)) g *= inv;
        if (correct && argmax(logits.row(i)) == y[i]) ++*correct;
    }
    return loss * inv;
}

void backward_stack(const std::vector<DenseLayer>& layers, const Tape& tape, Mat dh, std::vector<DenseLayer>& grads) {
    grads.resize(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        grads[l].w = matmul_tn(dh, tape.inputs[l]);
        grads[l].b.assign(dh.cols(), 0.0);
        for (std::size_t i = 0; i < dh.rows(); ++i) axpy(1.0, dh.row(i), grads[l].b);
        if (l == 0) break;
        Mat da = matmul(dh, layers[l].w);
        const Mat& pre = tape.pre[l - 1];
        auto dv = da.values();
        const auto pv = pre.values();
        for (std::size_t k = 0; k < dv.size(); ++k)
            if (pv[k] <= 0.0) dv[k] = 0.0;
        dh = std::move(da);
    }
}

struct AdamState {
    std::vector<DenseLayer> m;
    std::vector<DenseLayer> v;
    long step = 0;

    explicit AdamState(const std::vector<DenseLayer>& layers) {
        for (const auto& layer : layers) {
            m.push_back({Mat(layer.w.rows(), layer.w.cols()), Vec(layer.b.size(), 0.0)});
            v.push_back({Mat(layer.w.rows(), layer.w.cols()), Vec(layer.b.size(), 0.0)});
        }
    }
};

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const TrainConfig& c, double bc1, double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.adam_eps);
    }
}

void adam_step(std::vector<DenseLayer>& layers, const std::vector<DenseLayer>& grads, AdamState& state,
               const TrainConfig& c) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        adam_update(layers[l].w.values(), grads[l].w.values(), state.m[l].w.values(), state.v[l].w.values(), c, bc1,
                    bc2);
        adam_update(layers[l].b, grads[l].b, state.m[l].b, state.v[l].b, c, bc1, bc2);
    }
}

std::vector<EpochLog> train_stack(std::vector<DenseLayer>& layers, const Mat& z, std::span<const int> y,
                                  const TrainConfig& config) {
    const std::size_t n = z.rows();
    const std::size_t d = z.cols();
    SeededRng shuffle_rng(derive_seed(config.seed, 1));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    AdamState adam(layers);
    std::vector<DenseLayer> grads;
    std::vector<EpochLog> log;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[shuffle_rng.below(i + 1)]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t nb = std::min(config.batch_size, n - start);
            Mat zb(nb, d);
            std::vector<int> yb(nb);
            for (std::size_t i = 0; i < nb; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(z.row(src).begin(), d, zb.row(i).begin());
                yb[i] = y[src];
            }
            Tape tape;
            const Mat logits = forward_stack(layers, zb, &tape);
            Mat dlogits;
            const double loss = batch_loss(logits, yb, dlogits, &correct);
            if (!std::isfinite(loss))
                throw DivergenceError(fmt::format("training diverged: non-finite loss in epoch {}", epoch), epoch);
            loss_sum += loss * static_cast<double>(nb);
            backward_stack(layers, tape, std::move(dlogits), grads);
            adam_step(layers, grads, adam, config);
        }
        log.push_back({epoch, loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)});
    }
    return log;
}

DenseLayer as_layer(const LinearHead& head) { return {head.u.transposed(), head.biases}; }

LinearHead from_layer(const DenseLayer& layer) { return {layer.w.transposed(), layer.b}; }

}  // namespace

MlpHead init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t num_classes,
                 std::uint64_t seed) {
    if (input_dim == 0 || num_classes < 2) throw ParameterError("init_mlp: need input_dim > 0 and K >= 2");
    SeededRng rng(derive_seed(seed, 0));
    MlpHead head;
    std::size_t fan_in = input_dim;
    for (std::size_t width : hidden) {
        DenseLayer layer{Mat(width, fan_in), Vec(width, 0.0)};
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& w : layer.w.values()) w = rng.uniform(-limit, limit);
        head.layers.push_back(std::move(layer));
        fan_in = width;
    }
    head.layers.push_back({Mat(num_classes, fan_in), Vec(num_classes, 0.0)});
    return head;
}

Trained<MlpHead> train_mlp(const Mat& z, std::span<const int> y, std::size_t num_classes, const TrainConfig& config) {
    config.validate();
    check_labels(z, y, num_classes);
    Trained<MlpHead> out{init_mlp(z.cols(), config.hidden, num_classes, config.seed), {}};
    out.log = train_stack(out.head.layers, z, y, config);
    return out;
}

Trained<LinearHead> fit_linear_head(const Mat& z, std::span<const int> y, std::size_t num_classes,
                                    const TrainConfig& config) {
    config.validate();
    if (num_classes < 2) throw ParameterError("linear head needs K >= 2");
    check_labels(z, y, num_classes);
    std::vector<DenseLayer> layers{{Mat(num_classes, z.cols()), Vec(num_classes, 0.0)}};
    auto log = train_stack(layers, z, y, config);
    return {from_layer(layers.front()), std::move(log)};
}

Mat forward(const LinearHead& head, const Mat& z) {
    if (z.cols() != head.input_dim())
        throw DimensionError(fmt::format("linear head expects {} features, got {}", head.input_dim(), z.cols()));
    Mat logits = matmul(z, head.u);
    for (std::size_t i = 0; i < logits.rows(); ++i) axpy(1.0, head.biases, logits.row(i));
    return logits;
}

Mat forward(const MlpHead& head, const Mat& z) {
    if (z.cols() != head.input_dim())
        throw DimensionError(fmt::format("MLP head expects {} features, got {}", head.input_dim(), z.cols()));
    return forward_stack(head.layers, z, nullptr);
}

Mat forward(const Head& head, const Mat& z) {
    return std::visit([&](const auto& h) { return forward(h, z); }, head);
}

Vec forward(const Head& head, std::span<const double> z) {
    if (z.size() != head_input_dim(head))
        throw DimensionError(fmt::format("head expects {} features, got {}", head_input_dim(head), z.size()));
    if (const auto* lin = std::get_if<LinearHead>(&head)) {
        Vec logits = matvec_t(lin->u, z);
        for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += lin->biases[k];
        return logits;
    }
    const auto& layers = std::get<MlpHead>(head).layers;
    Vec a(z.begin(), z.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Vec h = matvec(layers[l].w, a);
        for (std::size_t i = 0; i < h.size(); ++i) {
            h[i] += layers[l].b[i];
            if (l + 1 < layers.size()) h[i] = std::max(h[i], 0.0);
        }
        a = std::move(h);
    }
    return a;
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw ParameterError(fmt::format("label {} outside [0, {})", label, logits.size()));
    return log_sum_exp(logits) - logits[static_cast<std::size_t>(label)];
}

double mean_loss(const Head& head, const Mat& z, std::span<const int> y) {
    check_labels(z, y, head_num_classes(head));
    const Mat logits = forward(head, z);
    double s = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) s += cross_entropy(logits.row(i), y[i]);
    return s / static_cast<double>(logits.rows());
}

double accuracy(const Head& head, const Mat& z, std::span<const int> y) {
    check_labels(z, y, head_num_classes(head));
    const Mat logits = forward(head, z);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) correct += argmax(logits.row(i)) == y[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

namespace {

double feature_gradient(const LinearHead& head, std::span<const double> z, int label, Vec& grad_z) {
    if (z.size() != head.input_dim())
        throw DimensionError(fmt::format("linear head expects {} features, got {}", head.input_dim(), z.size()));
    Vec logits = matvec_t(head.u, z);
    for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += head.biases[k];
    Vec residual(logits.size());
    const double loss = softmax_residual(logits, label, residual);
    grad_z = matvec(head.u, residual);
    return loss;
}

double feature_gradient(const MlpHead& head, std::span<const double> z, int label, Vec& grad_z) {
    if (z.size() != head.input_dim())
        throw DimensionError(fmt::format("MLP head expects {} features, got {}", head.input_dim(), z.size()));
    const auto& layers = head.layers;
    std::vector<Vec> pre;
    pre.reserve(layers.size());
    Vec a(z.begin(), z.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Vec h = matvec(layers[l].w, a);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += layers[l].b[i];
        pre.push_back(h);
        if (l + 1 < layers.size())
            for (double& v : h) v = std::max(v, 0.0);
        a = std::move(h);
    }
    Vec dh(a.size());
    const double loss = softmax_residual(a, label, dh);
    for (std::size_t l = layers.size(); l-- > 0;) {
        Vec da = matvec_t(layers[l].w, dh);
        if (l == 0) {
            grad_z = std::move(da);
            break;
        }
        for (std::size_t i = 0; i < da.size(); ++i)
            if (pre[l - 1][i] <= 0.0) da[i] = 0.0;
        dh = std::move(da);
    }
    return loss;
}

}  // namespace

double loss_and_feature_gradient(const Head& head, std::span<const double> z, int label, Vec& grad_z) {
    const std::size_t k = head_num_classes(head);
    if (label < 0 || static_cast<std::size_t>(label) >= k)
        throw ParameterError(fmt::format("label {} outside [0, {})", label, k));
    return std::visit([&](const auto& h) { return feature_gradient(h, z, label, grad_z); }, head);
}

Vec input_gradient(const Head& head, const ProjectionModel& projection, std::span<const double> x, int label,
                   double* loss) {
    if (x.size() != projection.input_dim())
        throw DimensionError(fmt::format("input has dimension {}, projection expects {}", x.size(),
                                         projection.input_dim()));
    const Vec z = projection.apply(x);
    Vec gz;
    const double l = loss_and_feature_gradient(head, z, label, gz);
    if (loss) *loss = l;
    return matvec_t(projection.w, gz);
}

double loss_and_parameter_gradients(const MlpHead& head, const Mat& z, std::span<const int> y, MlpHead& grads) {
    check_labels(z, y, head.num_classes());
    Tape tape;
    const Mat logits = forward_stack(head.layers, z, &tape);
    Mat dlogits;
    const double loss = batch_loss(logits, y, dlogits, nullptr);
    backward_stack(head.layers, tape, std::move(dlogits), grads.layers);
    return loss;
}

double loss_and_parameter_gradients(const LinearHead& head, const Mat& z, std::span<const int> y, LinearHead& grads) {
    check_labels(z, y, head.num_classes());
    const std::vector<DenseLayer> layers{as_layer(head)};
    Tape tape;
    const Mat logits = forward_stack(layers, z, &tape);
    Mat dlogits;
    const double loss = batch_loss(logits, y, dlogits, nullptr);
    std::vector<DenseLayer> g;
    backward_stack(layers, tape, std::move(dlogits), g);
    grads = from_layer(g.front());
    return loss;
}

double lipschitz_upper_bound(const MlpHead& head) {
    double bound = 1.0;
    for (const auto& layer : head.layers) bound *= spectral_norm(layer.w);
    return bound;
}

double lipschitz_upper_bound(const LinearHead& head) { return spectral_norm(head.u); }

double lipschitz_upper_bound(const Head& head) {
    return std::visit([](const auto& h) { return lipschitz_upper_bound(h); }, head);
}

}  // namespace spcarob
