#include <gtest/gtest.h>

#include <cmath>

#include "dklvae/mlp.hpp"
#include "oracle.hpp"

using namespace dklvae;

namespace {

double weighted_sum(const Matrix& y, const Matrix& w) {
    return y.cwiseProduct(w).sum();
}

}  // namespace

TEST(InitMlp, DeterministicPerSeed) {
    const std::vector<LayerSpec> spec{{3, 5, Activation::tanh}, {5, 2, Activation::identity}};
    Rng a(1), b(1);
    EXPECT_EQ(init_mlp(spec, a).params, init_mlp(spec, b).params);
}

TEST(InitMlp, WeightVarianceIsOneOverFanIn) {
    const std::vector<LayerSpec> spec{{4, 4, Activation::identity}};
    Rng rng(77);
    double sum = 0.0, sumsq = 0.0;
    std::size_t count = 0;
    while (count < 10000) {
        const MlpModel m = init_mlp(spec, rng);
        for (std::size_t i = 0; i < 16; ++i) {
            sum += m.params[i];
            sumsq += m.params[i] * m.params[i];
            ++count;
        }
        for (std::size_t i = 16; i < 20; ++i) EXPECT_EQ(m.params[i], 0.0);
    }
    const double mean = sum / static_cast<double>(count);
    const double var = sumsq / static_cast<double>(count) - mean * mean;
    EXPECT_NEAR(var, 0.25, 0.25 * 0.2);
}

TEST(InitMlp, RejectsBadSpecs) {
    Rng rng(0);
    EXPECT_THROW(init_mlp(std::vector<LayerSpec>{}, rng), Error);
    EXPECT_THROW(init_mlp(std::vector<LayerSpec>{{3, 0, Activation::tanh}}, rng), Error);
    EXPECT_THROW(init_mlp(std::vector<LayerSpec>{{3, 4, Activation::tanh}, {5, 1, Activation::tanh}}, rng), Error);
}

TEST(Forward, IdentityLayer) {
    MlpModel m;
    m.layers = {{3, 3, Activation::identity}};
    m.params.assign(12, 0.0);
    m.params[0] = m.params[4] = m.params[8] = 1.0;
    Rng rng(4);
    const Matrix x = sample_standard_normal(rng, 5, 3);
    EXPECT_EQ(forward(m, x).y, x);
}

TEST(Forward, TanhAndSoftplusAtZero) {
    Rng rng(4);
    MlpModel t = init_mlp(std::vector<LayerSpec>{{3, 4, Activation::tanh}}, rng);
    EXPECT_EQ(forward(t, Matrix::Zero(2, 3)).y, Matrix::Zero(2, 4));
    MlpModel s = init_mlp(std::vector<LayerSpec>{{3, 4, Activation::softplus}}, rng);
    const Matrix y = forward(s, Matrix::Zero(2, 3)).y;
    for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y.data()[i], std::log(2.0));
}

TEST(Activations, StableAndInRange) {
    EXPECT_GT(softplus(-800.0), -1e-300);
    EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
    EXPECT_GT(sigmoid(-40.0), 0.0);
    EXPECT_LE(sigmoid(40.0), 1.0);
    EXPECT_EQ(activation_from_string(to_string(Activation::softplus)), Activation::softplus);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(5);
    const std::vector<LayerSpec> spec{{3, 6, Activation::tanh}, {6, 2, Activation::softplus}};
    const MlpModel m = init_mlp(spec, rng);
    const auto fw = forward(m, sample_standard_normal(rng, 4, 3));
    const auto g = backward(m, fw.trace, Matrix::Zero(4, 2));
    for (double v : g.dparams) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(g.dx, Matrix::Zero(4, 3));
}

class BackwardFiniteDifference : public ::testing::TestWithParam<Activation> {};

TEST_P(BackwardFiniteDifference, MatchesCentralDifferences) {
    Rng rng(11);
    const std::vector<LayerSpec> spec{{4, 5, Activation::tanh}, {5, 3, GetParam()}};
    MlpModel m = init_mlp(spec, rng);
    for (auto& p : m.params) p += 0.1 * rng.normal();  // non-zero biases
    const Matrix x = sample_standard_normal(rng, 6, 4);
    const Matrix w = sample_standard_normal(rng, 6, 3);

    const auto fw = forward(m, x);
    const auto g = backward(m, fw.trace, w);

    auto loss_params = [&](std::vector<double> p) {
        MlpModel c = m;
        c.params = std::move(p);
        return weighted_sum(forward(c, x).y, w);
    };
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        const double fd = oracle::central_difference(loss_params, m.params, i, 1e-5);
        EXPECT_TRUE(oracle::close_rel(g.dparams[i], fd, 1e-4, 1e-3)) << "param " << i << ": " << g.dparams[i]
                                                                     << " vs " << fd;
    }
    std::vector<double> xv(x.data(), x.data() + x.size());
    auto loss_x = [&](std::vector<double> v) {
        return weighted_sum(forward(m, Eigen::Map<Matrix>(v.data(), 6, 4)).y, w);
    };
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double fd = oracle::central_difference(loss_x, xv, i, 1e-5);
        EXPECT_TRUE(oracle::close_rel(g.dx.data()[i], fd, 1e-4, 1e-3)) << "x " << i;
    }
}

INSTANTIATE_TEST_SUITE_P(OutputActivations, BackwardFiniteDifference,
                         ::testing::Values(Activation::identity, Activation::tanh, Activation::softplus,
                                           Activation::sigmoid));

TEST(Backward, LinearLeastSquaresClosedForm) {
    // y = x W + b, loss = 1/2 ||y - t||^2  =>  dW = x^T (y - t), db = colsum(y - t).
    Rng rng(21);
    const std::vector<LayerSpec> spec{{3, 2, Activation::identity}};
    const MlpModel m = init_mlp(spec, rng);
    const Matrix x = sample_standard_normal(rng, 7, 3);
    const Matrix t = sample_standard_normal(rng, 7, 2);
    const auto fw = forward(m, x);
    const Matrix r = fw.y - t;
    const auto g = backward(m, fw.trace, r);
    const Matrix dw = x.transpose() * r;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_NEAR(g.dparams[i * 2 + j], dw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 1e-8);
        }
    }
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_NEAR(g.dparams[6 + j], r.col(static_cast<Eigen::Index>(j)).sum(), 1e-8);
    }
}

TEST(Adam, ZeroGradientIsANoOp) {
    AdamState s(3);
    std::vector<double> p{1.0, -2.0, 3.5};
    const auto before = p;
    adam_step(s, p, std::vector<double>{0.0, 0.0, 0.0}, 0.1);
    EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    AdamState s(1);
    std::vector<double> p{0.0};
    adam_step(s, p, std::vector<double>{1.0}, 0.1);
    // m_hat = 1, v_hat = 1 => step = 0.1 / (1 + 1e-8)
    EXPECT_NEAR(p[0], -0.1 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
    AdamState s(2);
    std::vector<double> p{1.0, 2.0};
    adam_step(s, p, std::vector<double>{0.3, -4.0}, 0.0);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
}

TEST(Adam, DeterministicTrajectoryAndLengthCheck) {
    auto run = [] {
        AdamState s(2);
        std::vector<double> p{1.0, -1.0};
        for (int i = 0; i < 50; ++i) adam_step(s, p, std::vector<double>{2 * p[0], 3 * p[1]}, 0.01);
        return p;
    };
    EXPECT_EQ(run(), run());
    AdamState s(2);
    std::vector<double> p{1.0, 2.0};
    EXPECT_THROW(adam_step(s, p, std::vector<double>{1.0}, 0.1), Error);
}

TEST(Forward, EachRowIndependentOfItsPositionInTheBatch) {
    Rng rng(44);
    const std::vector<LayerSpec> spec{{2304, 128, Activation::tanh}, {128, 128, Activation::tanh},
                                      {128, 2, Activation::identity}};
    const MlpModel m = init_mlp(spec, rng);
    for (Eigen::Index batch : {1, 3, 7, 100, 101}) {
        Matrix x(batch, 2304);
        const Matrix row = sample_standard_normal(rng, 1, 2304);
        for (Eigen::Index i = 0; i < batch; ++i) x.row(i) = row;
        const Matrix y = predict(m, x);
        const Matrix single = predict(m, row);
        for (Eigen::Index i = 0; i < batch; ++i) ASSERT_EQ(y.row(i), y.row(0)) << "batch " << batch << " row " << i;
        EXPECT_EQ(y.row(0), single.row(0)) << "batch " << batch;
    }
    const std::vector<LayerSpec> small{{2, 4, Activation::tanh}, {4, 6, Activation::identity}};
    const MlpModel s = init_mlp(small, rng);
    Matrix z(5, 2);
    for (Eigen::Index i = 0; i < 5; ++i) z.row(i) << 0.3, -1.7;
    const Matrix out = predict(s, z);
    for (Eigen::Index i = 1; i < 5; ++i) EXPECT_EQ(out.row(i), out.row(0));
}
