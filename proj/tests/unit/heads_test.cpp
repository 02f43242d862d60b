#include <gtest/gtest.h>

#include <cmath>

#include "spcarob/error.hpp"
#include "spcarob/heads.hpp"
#include "test_support.hpp"

using namespace spcarob;
using spcarob::testing::random_linear_head;
using spcarob::testing::random_mat;
using spcarob::testing::random_mlp_head;
using spcarob::testing::random_projection;
using spcarob::testing::random_vec;

namespace {

double loss_at(const Head& head, const ProjectionModel& p, std::span<const double> x, int label) {
    return cross_entropy(forward(head, p.apply(x)), label);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// XOR on {±1}², label = (x0 * x1 > 0).
void xor_data(Mat& z, std::vector<int>& y) {
    z = Mat(200, 2);
    y.resize(200);
    SeededRng rng(1);
    for (std::size_t i = 0; i < 200; ++i) {
        const double a = rng.below(2) ? 1.0 : -1.0;
        const double b = rng.below(2) ? 1.0 : -1.0;
        z(i, 0) = a + rng.uniform(-0.1, 0.1);
        z(i, 1) = b + rng.uniform(-0.1, 0.1);
        y[i] = a * b > 0 ? 1 : 0;
    }
}

}  // namespace

TEST(Forward, ZeroParametersGiveZeroLogits) {
    const LinearHead lin{Mat(3, 4), Vec(4, 0.0)};
    const Mat logits = forward(lin, Mat(2, 3, 0.7));
    for (double v : logits.values()) EXPECT_EQ(v, 0.0);
    EXPECT_NEAR(cross_entropy(logits.row(0), 2), std::log(4.0), 1e-15);
    const MlpHead mlp = init_mlp(3, {5}, 4, 1);
    const Mat out = forward(mlp, Mat(1, 3, 0.5));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);  // zero output layer
}

TEST(Forward, LinearHandComputed) {
    const LinearHead h{Mat::from_rows({{1, 2}, {3, -1}}), Vec{0.5, -0.5}};
    const Mat z = Mat::from_rows({{1, 1}, {2, 0}});
    const Mat l = forward(h, z);
    EXPECT_DOUBLE_EQ(l(0, 0), 4.5);
    EXPECT_DOUBLE_EQ(l(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(l(1, 0), 2.5);
    EXPECT_DOUBLE_EQ(l(1, 1), 3.5);
    const Vec single = forward(Head{h}, z.row(1));
    EXPECT_DOUBLE_EQ(single[1], 3.5);
    EXPECT_THROW(forward(h, Mat(1, 3)), DimensionError);
}

TEST(Forward, OneHiddenUnitByHand) {
    MlpHead h;
    h.layers.push_back({Mat::from_rows({{2.0, 1.0}}), Vec{-1.0}});
    h.layers.push_back({Mat::from_rows({{3.0}, {-1.0}}), Vec{0.0, 1.0}});
    const Vec out = forward(Head{h}, Vec{1.0, 0.5});  // hidden = relu(2 + 0.5 - 1) = 1.5
    EXPECT_DOUBLE_EQ(out[0], 4.5);
    EXPECT_DOUBLE_EQ(out[1], -0.5);
    const Vec neg = forward(Head{h}, Vec{0.0, 0.0});  // hidden clipped at 0
    EXPECT_DOUBLE_EQ(neg[0], 0.0);
    EXPECT_DOUBLE_EQ(neg[1], 1.0);
}

TEST(Forward, BatchAndSingleAgree) {
    SeededRng rng(3);
    const Head h = random_mlp_head(rng, 6, {8, 5}, 3);
    const Mat z = random_mat(rng, 4, 6);
    const Mat batch = forward(h, z);
    for (std::size_t i = 0; i < 4; ++i) {
        const Vec one = forward(h, z.row(i));
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(batch(i, k), one[k], 1e-13);
    }
}

TEST(Loss, ShiftInvariance) {
    const Vec a{1.0, -2.0, 0.5};
    Vec b = a;
    for (double& v : b) v += 1000.0;
    EXPECT_EQ(argmax(a), argmax(b));
    EXPECT_NEAR(cross_entropy(a, 1), cross_entropy(b, 1), 1e-10);
}

TEST(InputGradient, BinaryLinearClosedForm) {
    SeededRng rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_projection(rng, 4, 9);
        const LinearHead h = random_linear_head(rng, 4, 2);
        const BinaryLinear bl = h.binary();
        const Vec x = random_vec(rng, 9, 0, 1);
        const int label = static_cast<int>(rng.below(2));
        const double y = label == 1 ? 1.0 : -1.0;
        const Vec z = p.apply(x);
        const double m = y * (dot(bl.u, z) + bl.bias);
        const double sig = 1.0 / (1.0 + std::exp(-m));
        const Vec wtu = matvec_t(p.w, bl.u);
        const Vec g = input_gradient(Head{h}, p, x, label);
        for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(g[j], (sig - 1.0) * y * wtu[j], 1e-10);
    }
}

TEST(InputGradient, FiniteDifferencesBothHeads) {
    SeededRng rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_projection(rng, 5, 30, 0.5);
        const Head heads[] = {Head{random_linear_head(rng, 5, 4)}, Head{random_mlp_head(rng, 5, {7, 6}, 4)}};
        for (const Head& h : heads) {
            const Vec x = random_vec(rng, 30, 0, 1);
            const int label = static_cast<int>(rng.below(4));
            const Vec g = input_gradient(h, p, x, label);
            for (int s = 0; s < 20; ++s) {
                const std::size_t j = rng.below(30);
                Vec xp = x, xm = x;
                xp[j] += 1e-5;
                xm[j] -= 1e-5;
                const double fd = (loss_at(h, p, xp, label) - loss_at(h, p, xm, label)) / 2e-5;
                EXPECT_LT(rel_err(g[j], fd), 1e-4) << head_kind_name(h) << " coord " << j;
            }
        }
    }
}

TEST(InputGradient, ZeroProjectionGivesZero) {
    const auto p = ProjectionModel::from_matrix(ProjectionKind::Pca, Mat(3, 5), Vec(3, 0.1));
    SeededRng rng(6);
    const Head h = random_mlp_head(rng, 3, {4}, 2);
    for (double v : input_gradient(h, p, Vec(5, 0.3), 1)) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(input_gradient(h, p, Vec(4, 0.3), 1), DimensionError);
}

TEST(ParameterGradient, MlpFiniteDifferences) {
    SeededRng rng(7);
    for (int t = 0; t < 10; ++t) {
        MlpHead h = random_mlp_head(rng, 4, {6, 5}, 3);
        const Mat z = random_mat(rng, 8, 4);
        std::vector<int> y(8);
        for (int& v : y) v = static_cast<int>(rng.below(3));
        MlpHead g;
        loss_and_parameter_gradients(h, z, y, g);
        for (std::size_t l = 0; l < h.layers.size(); ++l) {
            auto check = [&](std::span<double> param, std::span<const double> grad) {
                for (int s = 0; s < 5; ++s) {
                    const std::size_t i = rng.below(param.size());
                    const double keep = param[i];
                    MlpHead scratch;
                    param[i] = keep + 1e-6;
                    const double lp = loss_and_parameter_gradients(h, z, y, scratch);
                    param[i] = keep - 1e-6;
                    const double lm = loss_and_parameter_gradients(h, z, y, scratch);
                    param[i] = keep;
                    EXPECT_LT(rel_err(grad[i], (lp - lm) / 2e-6), 1e-4) << "layer " << l;
                }
            };
            check(h.layers[l].w.values(), g.layers[l].w.values());
            check(h.layers[l].b, g.layers[l].b);
        }
    }
}

TEST(ParameterGradient, LinearFiniteDifferences) {
    SeededRng rng(8);
    LinearHead h = random_linear_head(rng, 5, 3);
    const Mat z = random_mat(rng, 10, 5);
    std::vector<int> y(10);
    for (int& v : y) v = static_cast<int>(rng.below(3));
    LinearHead g;
    loss_and_parameter_gradients(h, z, y, g);
    LinearHead scratch;
    for (std::size_t i = 0; i < h.u.size(); ++i) {
        const double keep = h.u.values()[i];
        h.u.values()[i] = keep + 1e-6;
        const double lp = loss_and_parameter_gradients(h, z, y, scratch);
        h.u.values()[i] = keep - 1e-6;
        const double lm = loss_and_parameter_gradients(h, z, y, scratch);
        h.u.values()[i] = keep;
        EXPECT_LT(rel_err(g.u.values()[i], (lp - lm) / 2e-6), 1e-4);
    }
}

TEST(Training, XorIsLearned) {
    Mat z;
    std::vector<int> y;
    xor_data(z, y);
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 32;
    cfg.hidden = {16, 8};
    cfg.learning_rate = 1e-2;
    cfg.seed = 3;
    const auto t = train_mlp(z, y, 2, cfg);
    EXPECT_DOUBLE_EQ(accuracy(Head{t.head}, z, y), 1.0);
    ASSERT_EQ(t.log.size(), 500u);
    int increases = 0;
    for (std::size_t e = 1; e < 20; ++e) increases += t.log[e].loss > t.log[e - 1].loss ? 1 : 0;
    EXPECT_LE(increases, 2);
}

TEST(Training, DeterministicPerSeed) {
    Mat z;
    std::vector<int> y;
    xor_data(z, y);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.hidden = {8};
    cfg.seed = 11;
    EXPECT_EQ(train_mlp(z, y, 2, cfg).head, train_mlp(z, y, 2, cfg).head);
    cfg.seed = 12;
    TrainConfig other = cfg;
    other.seed = 13;
    EXPECT_FALSE(train_mlp(z, y, 2, cfg).head == train_mlp(z, y, 2, other).head);
}

TEST(Training, ZeroEpochsReturnsInit) {
    Mat z;
    std::vector<int> y;
    xor_data(z, y);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.hidden = {8};
    const auto t = train_mlp(z, y, 2, cfg);
    EXPECT_EQ(t.head, init_mlp(2, {8}, 2, cfg.seed));
    EXPECT_NEAR(mean_loss(Head{t.head}, z, y), std::log(2.0), 1e-12);
}

TEST(Training, DivergenceNamesEpoch) {
    const Mat z = Mat::from_rows({{1e5}, {-1e5}, {2e5}, {-3e5}});
    const std::vector<int> y{0, 1, 1, 0};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e305;
    try {
        fit_linear_head(z, y, 2, cfg);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.epoch(), 1);
    }
}

TEST(LinearHead, SeparableAndSymmetric) {
    const Mat z = Mat::from_rows({{1.0, 0.5}, {-1.0, -0.5}});
    const std::vector<int> y{1, 0};
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 2;
    cfg.learning_rate = 0.05;
    const auto t = fit_linear_head(z, y, 2, cfg);
    EXPECT_DOUBLE_EQ(accuracy(Head{t.head}, z, y), 1.0);
    const BinaryLinear b = t.head.binary();
    EXPECT_GT(dot(b.u, z.row(0)) + b.bias, 0.0);
    EXPECT_LT(dot(b.u, z.row(1)) + b.bias, 0.0);
    EXPECT_NEAR(b.bias, 0.0, 1e-9);
}

TEST(LinearHead, MatchesLongRunGradientDescent) {
    // Random labels on 40 points in 3-d are not linearly separable, so the
    // logistic loss has a unique finite minimiser.
    SeededRng rng(9);
    const Mat z = random_mat(rng, 40, 3);
    std::vector<int> y(40);
    for (int& v : y) v = static_cast<int>(rng.below(2));
    TrainConfig cfg;
    cfg.epochs = 5000;
    cfg.batch_size = 40;
    cfg.learning_rate = 0.01;
    const Head h{fit_linear_head(z, y, 2, cfg).head};

    Vec u(3, 0.0);
    double c = 0.0;
    auto loss = [&] {
        double l = 0.0;
        for (std::size_t i = 0; i < 40; ++i) {
            const double s = dot(u, z.row(i)) + c;
            l += std::log1p(std::exp(-(y[i] == 1 ? s : -s)));
        }
        return l / 40.0;
    };
    for (int it = 0; it < 200000; ++it) {
        Vec gu(3, 0.0);
        double gc = 0.0;
        for (std::size_t i = 0; i < 40; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-(dot(u, z.row(i)) + c)));
            for (int j = 0; j < 3; ++j) gu[j] += (p - y[i]) * z(i, j) / 40.0;
            gc += (p - y[i]) / 40.0;
        }
        for (int j = 0; j < 3; ++j) u[j] -= 1.0 * gu[j];
        c -= 1.0 * gc;
    }
    EXPECT_NEAR(mean_loss(h, z, y), loss(), 1e-6);
}

TEST(Lipschitz, Examples) {
    MlpHead single;
    single.layers.push_back({Mat::from_rows({{3, 0}, {0, 1}}), Vec(2, 0.0)});
    EXPECT_NEAR(lipschitz_upper_bound(single), 3.0, 1e-12);
    MlpHead ident;
    for (int l = 0; l < 3; ++l) ident.layers.push_back({Mat::identity(4), Vec(4, 0.0)});
    EXPECT_NEAR(lipschitz_upper_bound(ident), 1.0, 1e-12);
}

TEST(Lipschitz, RandomPairsRespectBound) {
    SeededRng rng(10);
    const Head h = random_mlp_head(rng, 6, {10, 8}, 4);
    const double bound = lipschitz_upper_bound(h);
    for (int t = 0; t < 10000; ++t) {
        const Vec a = random_vec(rng, 6, -2, 2);
        const Vec b = random_vec(rng, 6, -2, 2);
        const Vec fa = forward(h, a), fb = forward(h, b);
        Vec df(4), dz(6);
        for (int k = 0; k < 4; ++k) df[k] = fa[k] - fb[k];
        for (int j = 0; j < 6; ++j) dz[j] = a[j] - b[j];
        ASSERT_LE(norm2(df), bound * norm2(dz) * (1 + 1e-12));
    }
}
