#pragma once
#include <mfedch/adam.hpp>
#include <mfedch/dataset.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/gradients.hpp>
#include <mfedch/hyperparams.hpp>
#include <mfedch/losses.hpp>
#include <mfedch/rng.hpp>
#include <Eigen/Core>
#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace mfedch {

struct TrainState
{
    ProjectionStack P;
    CoefficientSet W;
    AdamState adam_P;
    std::vector<std::vector<AdamState>> adam_W; // [view][column]
    long iter = 0;
    std::vector<double> loss_history;
};

struct Model
{
    std::vector<Matrix> projections; // P_m, D_m x d
    Hyperparams hyper;
    std::uint64_t seed = 0;
    long iterations = 0;
    double final_loss = 0.0;
    double wall_seconds = 0.0;
    bool converged = false;

    Index embed_dim() const { return projections.empty() ? 0 : projections.front().cols(); }
};

enum class SweepMode {
    gauss_seidel, // reference: later columns see earlier updates
    jacobi,       // every column's gradient from the pre-sweep snapshot
};

enum class WInit {
    uniform,  // every column 1/n
    jittered, // 1/n plus seeded N(0, (jitter/n)^2) noise
};

struct TrainOptions
{
    SweepMode mode = SweepMode::gauss_seidel;
    WInit w_init = WInit::jittered;
    double w_jitter = 1.0;
};

class TrainingAborted : public Error
{
public:
    TrainingAborted(const std::string& what, TrainState state)
        : Error(ErrorKind::numeric, what), state_(std::make_shared<TrainState>(std::move(state)))
    {}

    const TrainState& state() const { return *state_; }

private:
    std::shared_ptr<const TrainState> state_;
};

/*
 * P_m^0: thin Q factor of a seeded D_m x d Gaussian draw (one stream per
 * view). W^0 per options.w_init. Adam moments zero. The history starts with
 * the initial total loss.
 */
inline TrainState init_state(const MultiViewDataset& ds, const Hyperparams& h, std::uint64_t seed,
                             const TrainOptions& opts = {})
{
    check_aligned(ds);
    const auto dims = ds.view_dims();
    for (std::size_t m = 0; m < dims.size(); ++m) {
        if (h.d < 1 || h.d > dims[m])
            fail(ErrorKind::config, "d=" + std::to_string(h.d) + " is not in [1, " + std::to_string(dims[m]) +
                                        "] for view " + std::to_string(m));
    }
    const Index n = ds.num_samples();
    TrainState st;
    st.P = ProjectionStack::zeros(dims, h.d);
    for (Index m = 0; m < ds.num_views(); ++m) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
        Matrix G(dims[m], h.d);
        for (Index c = 0; c < h.d; ++c)
            for (Index r = 0; r < dims[m]; ++r) G(r, c) = rng.normal();
        Eigen::HouseholderQR<Matrix> qr(G);
        st.P.block(m) = qr.householderQ() * Matrix::Identity(dims[m], h.d);
    }

    const double u = 1.0 / static_cast<double>(n);
    for (Index m = 0; m < ds.num_views(); ++m) {
        Matrix W = Matrix::Constant(n, n, u);
        if (opts.w_init == WInit::jittered) {
            Rng rng(derive_seed(seed, 0x10000ULL + static_cast<std::uint64_t>(m)));
            for (Index c = 0; c < n; ++c)
                for (Index r = 0; r < n; ++r) W(r, c) += opts.w_jitter * u * rng.normal();
        }
        st.W.W.push_back(std::move(W));
    }

    st.adam_P = AdamState(st.P.P.size());
    st.adam_W.assign(static_cast<std::size_t>(ds.num_views()),
                     std::vector<AdamState>(static_cast<std::size_t>(n), AdamState(n)));
    st.loss_history.push_back(total_loss(st.P, st.W, ds, h));
    return st;
}

/*
 * One Adam step on every column w_i^m, views ascending, columns ascending.
 */
inline void sweep_W(TrainState& st, const MultiViewDataset& ds, const Hyperparams& h,
                    SweepMode mode = SweepMode::gauss_seidel)
{
    const bool jacobi = mode == SweepMode::jacobi;
    const CoefficientSet snapshot = jacobi ? st.W : CoefficientSet{};
    const CoefficientSet& source = jacobi ? snapshot : st.W;
    GradWCache cache(st.P, source, ds, h);
    for (Index m = 0; m < st.W.num_views(); ++m) {
        for (Index i = 0; i < st.W.num_samples(); ++i) {
            Vector g;
            try {
                g = cache.grad(i, m, source);
            } catch (const Error& e) {
                fail(e.kind(), std::string(e.what()) + " (sweep column " + std::to_string(i) + ", view " +
                                   std::to_string(m) + ")");
            }
            adam_step(st.W.W[m].col(i), g, st.adam_W[m][i], h);
            if (!jacobi) cache.update(i, m, st.W);
        }
    }
}

inline void step_P(TrainState& st, const MultiViewDataset& ds, const Hyperparams& h)
{
    const Matrix g = grad_P(st.P, st.W, ds, h);
    Eigen::Map<Vector> flat(st.P.P.data(), st.P.P.size());
    adam_step(flat, Eigen::Map<const Vector>(g.data(), g.size()), st.adam_P, h);
}

inline Model to_model(const TrainState& st, const Hyperparams& h, std::uint64_t seed)
{
    Model model;
    for (Index m = 0; m < st.P.num_views(); ++m) model.projections.push_back(st.P.block(m));
    model.hyper = h;
    model.seed = seed;
    model.iterations = st.iter;
    model.final_loss = st.loss_history.back();
    return model;
}

struct FitResult
{
    Model model;
    TrainState state;
};

/*
 * Alternating minimization: each outer iteration is one W sweep, one Adam
 * step on P and one loss evaluation. Stops once two consecutive history
 * entries differ by at most tol, or after max_iters iterations.
 */
inline FitResult fit(const MultiViewDataset& ds, const Hyperparams& h, std::uint64_t seed,
                     const TrainOptions& opts = {})
{
    const auto start = std::chrono::steady_clock::now();
    TrainState st = init_state(ds, h, seed, opts);
    bool converged = false;
    while (st.iter < h.max_iters) {
        try {
            sweep_W(st, ds, h, opts.mode);
            step_P(st, ds, h);
            st.loss_history.push_back(total_loss(st.P, st.W, ds, h));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
            throw TrainingAborted(std::string(e.what()) + " at iteration " + std::to_string(st.iter + 1),
                                  std::move(st));
        }
        ++st.iter;
        const auto last = st.loss_history.size() - 1;
        if (std::abs(st.loss_history[last] - st.loss_history[last - 1]) <= h.tol) {
            converged = true;
            break;
        }
    }
    Model model = to_model(st, h, seed);
    model.converged = converged;
    model.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(model), std::move(st)};
}

} // namespace mfedch
