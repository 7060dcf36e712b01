#include "helpers.hpp"
#include <mfedch/adam.hpp>
#include <mfedch/trainer.hpp>
#include <gtest/gtest.h>
#include <cmath>
#include <limits>

using namespace mfedch;

namespace {

MultiViewDataset small_blobs() { return synth_blobs(2, 3, 10, {8, 8}, 0.5, 0); }

bool same(const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all(); }

} // namespace

TEST(Adam, FirstStepIsGammaOverOnePlusEps)
{
    Hyperparams h;
    Vector p = Vector::Zero(1);
    AdamState st(1);
    adam_step(p, Vector::Ones(1), st, h);
    EXPECT_EQ(st.t, 1);
    EXPECT_NEAR(p(0), -h.gamma / (1.0 + h.eps_adam), 1e-18);
    EXPECT_NEAR(p(0), -0.00099999999, 1e-14);
}

TEST(Adam, ZeroGradientIsAFixedPoint)
{
    Hyperparams h;
    Vector p(3);
    p << 1, -2, 3;
    const Vector start = p;
    AdamState st(3);
    for (int k = 0; k < 10; ++k) adam_step(p, Vector::Zero(3), st, h);
    EXPECT_TRUE(same(p, start));
    EXPECT_EQ(st.t, 10);
}

TEST(Adam, ConstantPositiveGradientDecreasesEveryStep)
{
    Hyperparams h;
    Vector p = Vector::Zero(1);
    AdamState st(1);
    adam_step(p, Vector::Constant(1, 0.3), st, h);
    const double first = p(0);
    adam_step(p, Vector::Constant(1, 0.3), st, h);
    EXPECT_LT(first, 0.0);
    EXPECT_LT(p(0), first);
}

TEST(Adam, SecondMomentNonNegativeAndStepBounded)
{
    Hyperparams h;
    std::mt19937_64 gen(1);
    Vector p = Vector::Zero(20);
    AdamState st(20);
    for (int k = 0; k < 500; ++k) {
        const Vector before = p;
        adam_step(p, testing_support::gaussian(gen, 20, 1, 1.0 + k % 7), st, h);
        EXPECT_LE((p - before).cwiseAbs().maxCoeff(), 2.0 * h.gamma);
        EXPECT_GE(st.m2.minCoeff(), 0.0);
    }
}

TEST(Adam, Errors)
{
    Hyperparams h;
    Vector p = Vector::Zero(2);
    AdamState st(2);
    try {
        adam_step(p, Vector::Zero(3), st, h);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::shape);
    }
    Vector g(2);
    g << 1, std::numeric_limits<double>::quiet_NaN();
    try {
        adam_step(p, g, st, h);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
}

TEST(Init, OrthonormalProjectionsAndUniformColumns)
{
    const auto ds = synth_blobs(2, 2, 2, {5, 3}, 1.0, 0);
    Hyperparams h;
    h.d = 3;
    TrainOptions opts;
    opts.w_init = WInit::uniform;
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        const auto st = init_state(ds, h, seed, opts);
        for (Index m = 0; m < 2; ++m) {
            const Matrix P = st.P.block(m);
            EXPECT_LE((P.transpose() * P - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_TRUE(st.W.W[m].isConstant(0.25, 0.0));
        }
        EXPECT_EQ(st.loss_history.size(), 1u);
        EXPECT_EQ(st.iter, 0);
        EXPECT_EQ(st.adam_P.t, 0);
    }
}

TEST(Init, JitteredColumnsAreDeterministicAndNonZero)
{
    const auto ds = small_blobs();
    const auto a = init_state(ds, Hyperparams{}, 5);
    const auto b = init_state(ds, Hyperparams{}, 5);
    const auto c = init_state(ds, Hyperparams{}, 6);
    for (Index m = 0; m < 2; ++m) {
        EXPECT_TRUE(same(a.W.W[m], b.W.W[m]));
        EXPECT_TRUE(same(a.P.block(m), b.P.block(m)));
        EXPECT_FALSE(same(a.W.W[m], c.W.W[m]));
        EXPECT_GT(a.W.W[m].colwise().norm().minCoeff(), 0.0);
        EXPECT_FALSE(a.W.W[m].isConstant(a.W.W[m](0, 0), 0.0));
    }
    EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Init, DimensionAboveViewIsConfigError)
{
    Hyperparams h;
    h.d = 9;
    try {
        init_state(small_blobs(), h, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

TEST(Sweep, GaussSeidelMatchesDirectGradientReference)
{
    const auto ds = synth_blobs(3, 2, 3, {3, 4, 2}, 0.5, 2);
    Hyperparams h;
    auto st = init_state(ds, h, 3);
    auto ref = st;
    sweep_W(st, ds, h);
    for (Index m = 0; m < 3; ++m)
        for (Index i = 0; i < 6; ++i)
            adam_step(ref.W.W[m].col(i), grad_w(i, m, ref.P, ref.W, ds, h), ref.adam_W[m][i], h);
    for (Index m = 0; m < 3; ++m) EXPECT_LE((st.W.W[m] - ref.W.W[m]).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sweep, JacobiUsesTheSnapshot)
{
    const auto ds = synth_blobs(2, 2, 3, {3, 4}, 0.5, 2);
    Hyperparams h;
    const auto start = init_state(ds, h, 3);
    auto ref = start;
    for (Index m = 0; m < 2; ++m)
        for (Index i = 0; i < 6; ++i)
            adam_step(ref.W.W[m].col(i), grad_w(i, m, start.P, start.W, ds, h), ref.adam_W[m][i], h);
    auto jac = start;
    sweep_W(jac, ds, h, SweepMode::jacobi);
    auto gs = start;
    sweep_W(gs, ds, h, SweepMode::gauss_seidel);
    for (Index m = 0; m < 2; ++m) EXPECT_LE((jac.W.W[m] - ref.W.W[m]).cwiseAbs().maxCoeff(), 1e-14);
    // The first column sees no earlier update in either mode.
    EXPECT_TRUE(same(jac.W.W[0].col(0), gs.W.W[0].col(0)));
    EXPECT_FALSE(same(jac.W.W[1], gs.W.W[1]));
}

TEST(Sweep, MovesEveryColumnAndIsDeterministic)
{
    const auto ds = small_blobs();
    Hyperparams h;
    auto a = init_state(ds, h, 1);
    auto b = a;
    const auto before = a;
    sweep_W(a, ds, h);
    sweep_W(b, ds, h);
    for (Index m = 0; m < 2; ++m) {
        EXPECT_TRUE(same(a.W.W[m], b.W.W[m]));
        for (Index i = 0; i < 30; ++i) EXPECT_FALSE(same(a.W.W[m].col(i), before.W.W[m].col(i)));
        for (Index i = 0; i < 30; ++i) EXPECT_EQ(a.adam_W[m][i].t, 1);
    }
}

TEST(Fit, ZeroBudgetReturnsTheInitialization)
{
    const auto ds = small_blobs();
    Hyperparams h;
    h.max_iters = 0;
    const auto r = fit(ds, h, 4);
    const auto init = init_state(ds, h, 4);
    EXPECT_EQ(r.state.loss_history.size(), 1u);
    EXPECT_EQ(r.model.iterations, 0);
    EXPECT_FALSE(r.model.converged);
    for (Index m = 0; m < 2; ++m) EXPECT_TRUE(same(r.model.projections[m], init.P.block(m)));
}

TEST(Fit, InfiniteToleranceStopsAfterOneIteration)
{
    Hyperparams h;
    h.tol = std::numeric_limits<double>::infinity();
    const auto r = fit(small_blobs(), h, 4);
    EXPECT_EQ(r.model.iterations, 1);
    EXPECT_EQ(r.state.loss_history.size(), 2u);
    EXPECT_TRUE(r.model.converged);
}

TEST(Fit, DescendsAndKeepsHistoryInvariants)
{
    Hyperparams h;
    h.max_iters = 150;
    const auto r = fit(small_blobs(), h, 0);
    const auto& hist = r.state.loss_history;
    EXPECT_EQ(static_cast<long>(hist.size()), r.state.iter + 1);
    for (double x : hist) EXPECT_TRUE(std::isfinite(x));
    EXPECT_LT(hist.back(), hist.front());
    EXPECT_EQ(r.model.final_loss, hist.back());
    EXPECT_EQ(r.model.projections[0].rows(), 8);
    EXPECT_EQ(r.model.embed_dim(), 2);
    if (r.model.converged) EXPECT_LE(std::abs(hist[hist.size() - 1] - hist[hist.size() - 2]), h.tol);
}

TEST(Fit, StoppingRuleUsesStoredHistory)
{
    Hyperparams h;
    h.tol = 0.05;
    h.max_iters = 2000;
    const auto r = fit(small_blobs(), h, 0);
    ASSERT_TRUE(r.model.converged);
    const auto& hist = r.state.loss_history;
    EXPECT_LE(std::abs(hist.back() - hist[hist.size() - 2]), h.tol);
    for (std::size_t t = 1; t + 1 < hist.size(); ++t) EXPECT_GT(std::abs(hist[t] - hist[t - 1]), h.tol);
}

TEST(Fit, BitIdenticalAcrossRuns)
{
    Hyperparams h;
    h.max_iters = 60;
    const auto a = fit(small_blobs(), h, 7);
    const auto b = fit(small_blobs(), h, 7);
    EXPECT_EQ(a.state.loss_history, b.state.loss_history);
    for (Index m = 0; m < 2; ++m) EXPECT_TRUE(same(a.model.projections[m], b.model.projections[m]));
}

TEST(Fit, ProjectionStepsStayWithinTwoGamma)
{
    const auto ds = small_blobs();
    Hyperparams h;
    auto st = init_state(ds, h, 0);
    for (int t = 0; t < 100; ++t) {
        const Matrix before = st.P.P;
        const auto W_before = st.W;
        sweep_W(st, ds, h);
        step_P(st, ds, h);
        EXPECT_LE((st.P.P - before).cwiseAbs().maxCoeff(), 2.0 * h.gamma);
        for (Index m = 0; m < 2; ++m) EXPECT_LE((st.W.W[m] - W_before.W[m]).cwiseAbs().maxCoeff(), 2.0 * h.gamma);
    }
}

TEST(Fit, NumericBlowUpCarriesTheState)
{
    Hyperparams h;
    h.gamma = 1e200;
    try {
        fit(small_blobs(), h, 0);
        FAIL();
    } catch (const TrainingAborted& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
        EXPECT_EQ(e.state().loss_history.size(), 1u);
        EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
    }
}
