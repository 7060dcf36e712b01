#include "helpers.hpp"
#include "oracles.hpp"
#include <mfedch/losses.hpp>
#include <gtest/gtest.h>
#include <cmath>
#include <numbers>

using namespace mfedch;
using testing_support::random_instance;

TEST(Cosine, HandValue)
{
    Vector u(2), v(2);
    u << 1, 0;
    v << 0.6, 0.8;
    EXPECT_NEAR(cosine_sim(u, v, 1.25, 1e-12), 0.48, 1e-12);
    EXPECT_NEAR(cosine_sim(3.0 * u, 5.0 * v, 1.0, 0.0), 0.6, 1e-15);
}

TEST(Cosine, ZeroVectorIsGuarded)
{
    const Vector z = Vector::Zero(3);
    const Vector v = Vector::Ones(3);
    EXPECT_EQ(cosine_sim(z, v, 1.0, 1e-12), 0.0);
}

TEST(Cosine, LengthMismatchIsShapeError)
{
    try {
        cosine_sim(Vector::Ones(2), Vector::Ones(3), 1.0, 1e-12);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::shape);
    }
}

TEST(LogSumExp, StableForLargeInputs)
{
    Vector x(2);
    x << 1000.0, 1000.0;
    EXPECT_NEAR(log_sum_exp(x), 1000.0 + std::log(2.0), 1e-12);
    x << -1000.0, -1000.0;
    EXPECT_NEAR(log_sum_exp(x), -1000.0 + std::log(2.0), 1e-12);
}

TEST(SampleInfoNCE, EqualSimilaritiesGiveTwoLogTwo)
{
    // V = 2, n = 2, every embedding the same direction: each anchor term is log n.
    std::vector<Matrix> Y(2, Matrix::Ones(3, 2));
    EXPECT_NEAR(sample_infonce_embedded(Y, 1.0, 1e-12), 2.0 * std::numbers::ln2, 1e-12);
    EXPECT_NEAR(sample_infonce_embedded(Y, 0.3, 1e-12), 2.0 * std::numbers::ln2, 1e-12);
}

TEST(SampleInfoNCE, SingleSampleIsZero)
{
    std::mt19937_64 gen(4);
    std::vector<Matrix> Y{testing_support::gaussian(gen, 3, 1), testing_support::gaussian(gen, 3, 1),
                          testing_support::gaussian(gen, 3, 1)};
    EXPECT_NEAR(sample_infonce_embedded(Y, 0.7, 1e-12), 0.0, 1e-15);
}

TEST(SampleInfoNCE, PerfectAlignmentBeatsMisalignment)
{
    // Orthogonal one-hot samples, identical across views versus shifted.
    const Matrix I = Matrix::Identity(3, 3);
    Matrix shifted(3, 3);
    shifted << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    const double aligned = sample_infonce_embedded({I, I}, 0.5, 1e-12);
    const double misaligned = sample_infonce_embedded({I, shifted}, 0.5, 1e-12);
    EXPECT_LT(aligned, misaligned);
    // aligned: per anchor log(e^2 + 2) - 2.
    EXPECT_NEAR(aligned, 2.0 * (std::log(std::exp(2.0) + 2.0) - 2.0), 1e-12);
}

TEST(Structural, UniformColumnsGiveVVMinusOneLogN)
{
    for (Index V : {2, 3}) {
        for (Index n : {2, 4, 7}) {
            CoefficientSet W;
            for (Index m = 0; m < V; ++m) W.W.push_back(Matrix::Constant(n, n, 1.0 / n));
            Hyperparams h;
            h.tau2 = 0.4;
            EXPECT_NEAR(structural_contrastive(W, h), V * (V - 1) * std::log(double(n)), 1e-12);
        }
    }
}

TEST(Reconstruction, IdentityCoefficientsLeaveOnlyTheRidge)
{
    auto inst = random_instance(3, 2, 4, {3, 5}, 2);
    for (auto& w : inst.W.W) w = Matrix::Identity(4, 4);
    Hyperparams h;
    h.alpha = 3.0;
    h.beta = 0.25;
    EXPECT_NEAR(reconstruction_penalty(inst.P, inst.ds, inst.W, h), 2 * 0.25 * 4, 1e-12);
}

TEST(Oracle, FiftyRandomInstancesMatchBruteForce)
{
    std::mt19937_64 meta(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const Index V = 2 + static_cast<Index>(meta() % 2);
        const Index n = 1 + static_cast<Index>(meta() % 8);
        std::vector<Index> dims;
        for (Index m = 0; m < V; ++m) dims.push_back(1 + static_cast<Index>(meta() % 5));
        const Index d = 1 + static_cast<Index>(meta() % static_cast<std::uint64_t>(*std::min_element(dims.begin(), dims.end())));
        auto inst = random_instance(meta(), V, n, dims, d);
        Hyperparams h;
        h.tau1 = 0.2 + (meta() % 100) / 50.0;
        h.tau2 = 0.2 + (meta() % 100) / 50.0;
        h.alpha = 0.5 + (meta() % 10) / 10.0;
        h.beta = 0.5 + (meta() % 10) / 10.0;

        std::vector<Matrix> Pm, Y;
        for (Index m = 0; m < V; ++m) {
            Pm.push_back(inst.P.block(m));
            Y.push_back(oracle::project(Pm.back(), inst.ds.views[m]));
        }
        const double s_ref = oracle::sample_infonce(Y, h.tau1, h.norm_eps);
        const double w_ref = oracle::structural(inst.W.W, h.tau2, h.norm_eps);
        const double r_ref = oracle::reconstruction(Pm, inst.ds.views, inst.W.W, h.alpha, h.beta);
        const double s = sample_infonce(inst.P, inst.ds, h);
        const double w = structural_contrastive(inst.W, h);
        const double r = reconstruction_penalty(inst.P, inst.ds, inst.W, h);
        // n = 1 makes the sample term exactly zero; compare absolutely there.
        if (n == 1) EXPECT_NEAR(s, 0.0, 1e-15);
        else EXPECT_LE(oracle::rel(s, s_ref), 1e-10) << "trial " << trial;
        if (n == 1) EXPECT_NEAR(w, 0.0, 1e-15);
        else EXPECT_LE(oracle::rel(w, w_ref), 1e-10) << "trial " << trial;
        EXPECT_LE(oracle::rel(r, r_ref), 1e-10) << "trial " << trial;
        EXPECT_LE(oracle::rel(total_loss(inst.P, inst.W, inst.ds, h), s_ref + h.lambda * (w_ref + r_ref)), 1e-10);
    }
}

TEST(TotalLoss, LambdaWeighsStructuralAndReconstruction)
{
    auto inst = random_instance(8, 3, 5, {2, 3, 4}, 2);
    Hyperparams h;
    h.lambda = 2.5;
    const double expected = sample_infonce(inst.P, inst.ds, h) +
                            2.5 * (structural_contrastive(inst.W, h) + reconstruction_penalty(inst.P, inst.ds, inst.W, h));
    EXPECT_NEAR(total_loss(inst.P, inst.W, inst.ds, h), expected, 1e-10 * std::abs(expected));
}

TEST(TotalLoss, ShapeMismatchIsShapeError)
{
    auto inst = random_instance(8, 2, 5, {2, 3}, 2);
    auto other = ProjectionStack::zeros({2, 4}, 2);
    try {
        total_loss(other, inst.W, inst.ds, Hyperparams{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::shape);
    }
}

TEST(TotalLoss, NonFiniteDataIsNumericError)
{
    auto inst = random_instance(8, 2, 5, {2, 3}, 2);
    inst.ds.views[0](0, 0) = std::numeric_limits<double>::infinity();
    try {
        total_loss(inst.P, inst.W, inst.ds, Hyperparams{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
}

TEST(Projection, StackBlocksAndEmbed)
{
    auto P = ProjectionStack::zeros({2, 3}, 2);
    EXPECT_EQ(P.P.rows(), 5);
    EXPECT_EQ(P.offsets, (std::vector<Index>{0, 2}));
    P.block(1).setOnes();
    EXPECT_TRUE(P.P.topRows(2).isZero(0.0));
    EXPECT_EQ(P.P(4, 1), 1.0);
    auto inst = random_instance(1, 2, 4, {2, 3}, 2);
    const auto Y = embed(inst.P, inst.ds);
    for (Index m = 0; m < 2; ++m)
        EXPECT_TRUE(Y[m].isApprox(oracle::project(inst.P.block(m), inst.ds.views[m]), 1e-14));
}
