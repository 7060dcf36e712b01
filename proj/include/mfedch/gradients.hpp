#pragma once
#include <mfedch/dataset.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/hyperparams.hpp>
#include <mfedch/losses.hpp>
#include <mfedch/rng.hpp>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mfedch {

/*
 * Partial derivative of sim(u, v) = u.v / ((|u||v| + eps) tau) with respect
 * to u, scaled by `weight` and added to `out`:
 *     (1/tau) [ v / N - (u.v) |v| u / (|u| N^2) ],   N = |u||v| + eps.
 */
inline void add_cosine_grad(const Eigen::Ref<const Vector>& u, double norm_u,
                            const Eigen::Ref<const Vector>& v, double norm_v,
                            double tau, double norm_eps, double weight, Eigen::Ref<Vector> out)
{
    const double N = norm_u * norm_v + norm_eps;
    out.noalias() += (weight / (tau * N)) * v;
    if (norm_u > 0.0) {
        const double c = u.dot(v);
        out.noalias() -= (weight * c * norm_v / (tau * N * N * norm_u)) * u;
    }
}

/*
 * Gradient of sample_infonce_embedded with respect to every embedding
 * column. Returns one d x n matrix per view.
 */
inline std::vector<Matrix> sample_infonce_embedding_grad(const std::vector<Matrix>& Y, double tau,
                                                         double norm_eps)
{
    const auto V = static_cast<Index>(Y.size());
    std::vector<Matrix> G;
    for (const auto& y : Y) G.push_back(Matrix::Zero(y.rows(), y.cols()));
    if (V == 0) return G;
    const Index n = Y.front().cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<Vector> norms;
    for (const auto& y : Y) norms.push_back(y.colwise().norm().transpose());

    Vector pos(V - 1);
    Vector all((V - 1) * n);
    for (Index m = 0; m < V; ++m) {
        const auto sims = detail::cross_view_sims(Y, m, tau, norm_eps);
        for (Index i = 0; i < n; ++i) {
            Index p = 0;
            for (Index v = 0; v < V; ++v) {
                if (v == m) continue;
                pos(p) = sims[v](i, i);
                all.segment(p * n, n) = sims[v].row(i).transpose();
                ++p;
            }
            const double lse_all = log_sum_exp(all);
            const double lse_pos = log_sum_exp(pos);
            for (Index v = 0; v < V; ++v) {
                if (v == m) continue;
                for (Index k = 0; k < n; ++k) {
                    double weight = std::exp(sims[v](i, k) - lse_all);
                    if (k == i) weight -= std::exp(sims[v](i, i) - lse_pos);
                    weight *= inv_n;
                    add_cosine_grad(Y[m].col(i), norms[m](i), Y[v].col(k), norms[v](k), tau, norm_eps,
                                    weight, G[m].col(i));
                    add_cosine_grad(Y[v].col(k), norms[v](k), Y[m].col(i), norms[m](i), tau, norm_eps,
                                    weight, G[v].col(k));
                }
            }
        }
    }
    return G;
}

/*
 * Gradient of structural_contrastive with respect to every column of every
 * W^m (one n x n matrix per view).
 */
inline std::vector<Matrix> structural_grad_all(const CoefficientSet& W, double tau, double norm_eps)
{
    const Index V = W.num_views();
    const Index n = W.num_samples();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<Matrix> G(static_cast<std::size_t>(V), Matrix::Zero(n, n));
    std::vector<Vector> norms;
    for (const auto& w : W.W) norms.push_back(w.colwise().norm().transpose());

    for (Index m = 0; m < V; ++m) {
        for (Index v = 0; v < V; ++v) {
            if (v == m) continue;
            const Matrix S = similarity_matrix(W.W[m], W.W[v], tau, norm_eps);
            for (Index i = 0; i < n; ++i) {
                const double lse = log_sum_exp(S.row(i));
                for (Index k = 0; k < n; ++k) {
                    double weight = std::exp(S(i, k) - lse);
                    if (k == i) weight -= 1.0;
                    weight *= inv_n;
                    add_cosine_grad(W.W[m].col(i), norms[m](i), W.W[v].col(k), norms[v](k), tau, norm_eps,
                                    weight, G[m].col(i));
                    add_cosine_grad(W.W[v].col(k), norms[v](k), W.W[m].col(i), norms[m](i), tau, norm_eps,
                                    weight, G[v].col(k));
                }
            }
        }
    }
    return G;
}

/*
 * Gradient of the total objective with respect to the single column w_i^m,
 * split into its two sources. Both parts already carry the lambda factor.
 *
 * contrastive:    lambda * d/dw of every structural term containing w_i^m,
 *                 both as anchor (i, m) and as comparison column of view m
 *                 for anchors in the other views.
 * reconstruction: lambda * (2 alpha Y^T (Y w - y_i) + 2 beta w),  Y = P_m^T X^m.
 */
struct GradWParts
{
    Vector contrastive;
    Vector reconstruction;
    Vector anchor_contrastive;  // the anchor-side share of `contrastive`

    Vector total() const { return contrastive + reconstruction; }
};

inline GradWParts grad_w_parts(Index i, Index m, const ProjectionStack& P, const CoefficientSet& W,
                               const MultiViewDataset& ds, const Hyperparams& h)
{
    const Index V = W.num_views();
    const Index n = W.num_samples();
    if (m < 0 || m >= V || i < 0 || i >= n)
        fail(ErrorKind::index, "column (" + std::to_string(i) + ", " + std::to_string(m) + ") out of range");
    const double inv_n = 1.0 / static_cast<double>(n);
    const double tau = h.tau2;
    const double eps = h.norm_eps;

    const auto w = W.W[m].col(i);
    const double norm_w = w.norm();
    GradWParts g{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};

    for (Index v = 0; v < V; ++v) {
        if (v == m) continue;
        const Vector norms_v = W.W[v].colwise().norm().transpose();

        // (m, v) terms with w_i^m as anchor.
        Vector s(n);
        for (Index k = 0; k < n; ++k) s(k) = W.W[v].col(k).dot(w) / ((norm_w * norms_v(k) + eps) * tau);
        const double lse = log_sum_exp(s);
        for (Index k = 0; k < n; ++k) {
            double weight = std::exp(s(k) - lse);
            if (k == i) weight -= 1.0;
            add_cosine_grad(w, norm_w, W.W[v].col(k), norms_v(k), tau, eps, weight * inv_n, g.anchor_contrastive);
        }

        // (v, m) terms where w_i^m is one of the comparison columns.
        const Matrix S = similarity_matrix(W.W[v], W.W[m], tau, eps);
        for (Index j = 0; j < n; ++j) {
            double weight = std::exp(S(j, i) - log_sum_exp(S.row(j)));
            if (j == i) weight -= 1.0;
            add_cosine_grad(w, norm_w, W.W[v].col(j), norms_v(j), tau, eps, weight * inv_n, g.contrastive);
        }
    }
    g.contrastive += g.anchor_contrastive;
    g.contrastive *= h.lambda;
    g.anchor_contrastive *= h.lambda;

    check_compatible(P, ds);
    const Matrix Y = P.block(m).transpose() * ds.views[m];
    g.reconstruction = h.lambda * (2.0 * h.alpha * (Y.transpose() * (Y * w - Y.col(i))) + 2.0 * h.beta * w);
    return g;
}

inline Vector grad_w(Index i, Index m, const ProjectionStack& P, const CoefficientSet& W,
                     const MultiViewDataset& ds, const Hyperparams& h)
{
    Vector g = grad_w_parts(i, m, P, W, ds, h).total();
    if (!g.allFinite())
        fail(ErrorKind::numeric, "grad_w: non-finite gradient at view " + std::to_string(m) + " column " +
                                     std::to_string(i));
    return g;
}

/*
 * Same result as grad_w_parts (up to rounding), computed from cached column
 * norms, cross-view similarity matrices, per-row exponential sums and the
 * Gram matrices Y_m^T Y_m, so a full sweep costs O(V^2 n^3) arithmetic and
 * O(V^2 n^2) exponentials. After changing column (i, m) of W call
 * update(i, m, W) before asking for the next gradient. P must not change
 * while the cache is alive.
 *
 * Similarities are cosines over tau, so every entry lies in [-1/tau, 1/tau]
 * and the row sums are kept as sum_k exp(s_k - 1/tau) without overflow.
 */
class GradWCache
{
public:
    GradWCache(const ProjectionStack& P, const CoefficientSet& W, const MultiViewDataset& ds, const Hyperparams& h)
        : h_(h), shift_(1.0 / h.tau2)
    {
        check_compatible(P, ds);
        check_compatible(W, ds);
        const auto V = static_cast<std::size_t>(W.num_views());
        for (const auto& w : W.W) norms_.push_back(w.colwise().norm().transpose());
        sims_.assign(V, std::vector<Matrix>(V));
        expsum_.assign(V, std::vector<Vector>(V));
        for (std::size_t m = 0; m < V; ++m)
            for (std::size_t v = 0; v < V; ++v) {
                if (v == m) continue;
                sims_[m][v] = similarity_matrix(W.W[m], W.W[v], h.tau2, h.norm_eps);
                expsum_[m][v] = (sims_[m][v].array() - shift_).exp().rowwise().sum();
            }
        for (Index m = 0; m < W.num_views(); ++m) {
            const Matrix Y = P.block(m).transpose() * ds.views[m];
            gram_.push_back(Y.transpose() * Y);
        }
    }

    GradWParts parts(Index i, Index m, const CoefficientSet& W) const
    {
        const Index V = W.num_views();
        const Index n = W.num_samples();
        if (m < 0 || m >= V || i < 0 || i >= n)
            fail(ErrorKind::index, "column (" + std::to_string(i) + ", " + std::to_string(m) + ") out of range");
        const double inv_n = 1.0 / static_cast<double>(n);
        const double tau = h_.tau2;
        const auto w = W.W[m].col(i);
        const double norm_w = norms_[m](i);
        GradWParts g{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};

        for (Index v = 0; v < V; ++v) {
            if (v == m) continue;
            const Matrix& Wv = W.W[v];
            const Matrix& S = sims_[m][v]; // anchor (i, m) against every w_k^v
            const Matrix& T = sims_[v][m]; // anchors (j, v) against w_i^m
            const Eigen::ArrayXd N = norm_w * norms_[v].array() + h_.norm_eps;
            const Eigen::ArrayXd c = (Wv.transpose() * w).array();

            Eigen::ArrayXd a = (S.row(i).transpose().array() - lse(m, v, i)).exp();
            a(i) -= 1.0;
            Eigen::ArrayXd b(n);
            for (Index j = 0; j < n; ++j) b(j) = std::exp(T(j, i) - lse(v, m, j));
            b(i) -= 1.0;

            // sum_k weight_k * d sim(w, w_k^v) / dw, see add_cosine_grad.
            auto accumulate = [&](const Eigen::ArrayXd& weight, Vector& out) {
                out.noalias() += Wv * (weight * inv_n / (tau * N)).matrix();
                if (norm_w > 0.0) {
                    const double radial = (weight * inv_n * c * norms_[v].array() / (tau * N.square())).sum();
                    out.noalias() -= (radial / norm_w) * w;
                }
            };
            accumulate(a, g.anchor_contrastive);
            accumulate(b, g.contrastive);
        }
        g.contrastive += g.anchor_contrastive;
        g.contrastive *= h_.lambda;
        g.anchor_contrastive *= h_.lambda;
        const Matrix& G = gram_[m];
        g.reconstruction = h_.lambda * (2.0 * h_.alpha * (G * w - G.col(i)) + 2.0 * h_.beta * w);
        return g;
    }

    Vector grad(Index i, Index m, const CoefficientSet& W) const
    {
        Vector g = parts(i, m, W).total();
        if (!g.allFinite())
            fail(ErrorKind::numeric, "grad_w: non-finite gradient at view " + std::to_string(m) + " column " +
                                         std::to_string(i));
        return g;
    }

    void update(Index i, Index m, const CoefficientSet& W)
    {
        const auto w = W.W[m].col(i);
        const double norm_w = w.norm();
        norms_[m](i) = norm_w;
        const Index n = W.num_samples();
        for (Index v = 0; v < W.num_views(); ++v) {
            if (v == m) continue;
            for (Index k = 0; k < n; ++k) {
                const double s = w.dot(W.W[v].col(k)) / ((norm_w * norms_[v](k) + h_.norm_eps) * h_.tau2);
                sims_[m][v](i, k) = s;

                // Row k of sims_[v][m] changes in one entry.
                double& sum = expsum_[v][m](k);
                const double old_term = std::exp(sims_[v][m](k, i) - shift_);
                sims_[v][m](k, i) = s;
                if (old_term > 0.5 * sum) {
                    sum = (sims_[v][m].row(k).array() - shift_).exp().sum();
                } else {
                    sum += std::exp(s - shift_) - old_term;
                }
            }
            expsum_[m][v](i) = (sims_[m][v].row(i).array() - shift_).exp().sum();
        }
    }

private:
    double lse(Index m, Index v, Index row) const { return shift_ + std::log(expsum_[m][v](row)); }

    Hyperparams h_;
    double shift_;
    std::vector<Vector> norms_;
    std::vector<std::vector<Matrix>> sims_;   // sims_[m][v](i, k) = sim(w_i^m, w_k^v)
    std::vector<std::vector<Vector>> expsum_; // expsum_[m][v](i) = sum_k exp(sims_[m][v](i, k) - shift_)
    std::vector<Matrix> gram_;
};

/*
 * Gradient of the total objective with respect to the stacked P (D x d).
 *
 * contrastive:    sample-level InfoNCE, back-propagated through y = P_m^T x.
 * reconstruction: lambda * 2 alpha X^m (I - W^m)(I - W^m)^T X^{mT} P_m per block.
 */
struct GradPParts
{
    Matrix contrastive;
    Matrix reconstruction;

    Matrix total() const { return contrastive + reconstruction; }
};

inline GradPParts grad_P_parts(const ProjectionStack& P, const CoefficientSet& W, const MultiViewDataset& ds,
                               const Hyperparams& h)
{
    check_compatible(P, ds);
    check_compatible(W, ds);
    const auto Y = embed(P, ds);
    const auto G = sample_infonce_embedding_grad(Y, h.tau1, h.norm_eps);
    GradPParts g{Matrix::Zero(P.P.rows(), P.P.cols()), Matrix::Zero(P.P.rows(), P.P.cols())};
    for (Index m = 0; m < ds.num_views(); ++m) {
        const auto& X = ds.views[m];
        g.contrastive.middleRows(P.offsets[m], P.dims[m]) = X * G[m].transpose();
        const Matrix residual = Y[m] - Y[m] * W.W[m];
        const Matrix dY = residual - residual * W.W[m].transpose();
        g.reconstruction.middleRows(P.offsets[m], P.dims[m]) = (2.0 * h.alpha * h.lambda) * (X * dY.transpose());
    }
    return g;
}

inline Matrix grad_P(const ProjectionStack& P, const CoefficientSet& W, const MultiViewDataset& ds,
                     const Hyperparams& h)
{
    Matrix g = grad_P_parts(P, W, ds, h).total();
    if (!g.allFinite()) fail(ErrorKind::numeric, "grad_P: non-finite gradient");
    return g;
}

/*
 * Central differences (f(x + h e_j) - f(x - h e_j)) / 2h for every j.
 */
template <class F>
inline Vector fd_gradient(F&& f, const Vector& x, double step)
{
    if (!(step > 0.0)) fail(ErrorKind::usage, "finite-difference step must be > 0");
    Vector g(x.size());
    Vector probe = x;
    for (Index j = 0; j < x.size(); ++j) {
        probe(j) = x(j) + step;
        const double fp = f(static_cast<const Vector&>(probe));
        probe(j) = x(j) - step;
        const double fm = f(static_cast<const Vector&>(probe));
        probe(j) = x(j);
        if (!std::isfinite(fp) || !std::isfinite(fm))
            fail(ErrorKind::numeric, "fd_gradient: non-finite function value at coordinate " + std::to_string(j));
        g(j) = (fp - fm) / (2.0 * step);
    }
    return g;
}

struct GradCoordinate
{
    std::string block; // "w" or "P"
    Index view = -1;   // view of w_i^m (w blocks only)
    Index column = -1; // i for w blocks, column of P for P
    Index row = -1;
};

struct GradCheckReport
{
    double max_rel_err = 0.0;
    GradCoordinate worst_coordinate;
    double step = 0.0;
    double analytic_norm = 0.0; // infinity norms of the worst block
    double numeric_norm = 0.0;
};

// The analytic side of check_gradients; replaceable for mutation tests.
struct AnalyticGradients
{
    std::function<Vector(Index, Index, const ProjectionStack&, const CoefficientSet&, const MultiViewDataset&,
                         const Hyperparams&)>
        w = [](Index i, Index m, const ProjectionStack& P, const CoefficientSet& W, const MultiViewDataset& ds,
               const Hyperparams& h) { return grad_w(i, m, P, W, ds, h); };
    std::function<Matrix(const ProjectionStack&, const CoefficientSet&, const MultiViewDataset&, const Hyperparams&)>
        P = [](const ProjectionStack& P, const CoefficientSet& W, const MultiViewDataset& ds, const Hyperparams& h) {
            return grad_P(P, W, ds, h);
        };
};

// ||a - g||_inf / max(||a||_inf, ||g||_inf, 1e-12)
inline double relative_error(const Vector& analytic, const Vector& numeric)
{
    const double scale = std::max({analytic.lpNorm<Eigen::Infinity>(), numeric.lpNorm<Eigen::Infinity>(), 1e-12});
    return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

/*
 * Compares the analytic gradient of every column w_i^m and of P against
 * central differences of total_loss; reports the worst block.
 */
inline GradCheckReport check_gradients(const ProjectionStack& P, const CoefficientSet& W,
                                       const MultiViewDataset& ds, const Hyperparams& h, double step,
                                       const AnalyticGradients& analytic = {})
{
    GradCheckReport report;
    report.step = step;
    report.max_rel_err = -1.0;

    auto consider = [&](const Vector& a, const Vector& g, GradCoordinate where, Index rows) {
        const double err = relative_error(a, g);
        if (err > report.max_rel_err) {
            Index j = 0;
            (a - g).cwiseAbs().maxCoeff(&j);
            if (where.block == "P") {
                where.row = j % rows;
                where.column = j / rows;
            } else {
                where.row = j;
            }
            report.max_rel_err = err;
            report.worst_coordinate = where;
            report.analytic_norm = a.lpNorm<Eigen::Infinity>();
            report.numeric_norm = g.lpNorm<Eigen::Infinity>();
        }
    };

    CoefficientSet probe = W;
    for (Index m = 0; m < W.num_views(); ++m) {
        for (Index i = 0; i < W.num_samples(); ++i) {
            const Vector a = analytic.w(i, m, P, W, ds, h);
            const Vector x = W.W[m].col(i);
            const Vector g = fd_gradient(
                [&](const Vector& col) {
                    probe.W[m].col(i) = col;
                    return total_loss(P, probe, ds, h);
                },
                x, step);
            probe.W[m].col(i) = x;
            consider(a, g, GradCoordinate{"w", m, i, -1}, 0);
        }
    }

    const Matrix aP = analytic.P(P, W, ds, h);
    ProjectionStack probeP = P;
    const Vector xP = Eigen::Map<const Vector>(P.P.data(), P.P.size());
    const Vector gP = fd_gradient(
        [&](const Vector& flat) {
            probeP.P = Eigen::Map<const Matrix>(flat.data(), P.P.rows(), P.P.cols());
            return total_loss(probeP, W, ds, h);
        },
        xP, step);
    consider(Eigen::Map<const Vector>(aP.data(), aP.size()), gP, GradCoordinate{"P", -1, -1, -1}, P.P.rows());
    return report;
}

struct GradCheckInstance
{
    MultiViewDataset ds;
    ProjectionStack P;
    CoefficientSet W;
    Hyperparams h;
};

/*
 * Seeded random instance with n <= 6, V <= 3, D_m <= 5, d <= 3. With
 * randomize_hyper the weights and temperatures are drawn as well; otherwise
 * those of `base` are kept.
 */
inline GradCheckInstance make_gradcheck_instance(std::uint64_t seed, const Hyperparams& base,
                                                 bool randomize_hyper = true)
{
    Rng rng(derive_seed(seed, 0x6772616463686bULL));
    GradCheckInstance inst;
    const Index V = 2 + static_cast<Index>(rng.below(2));
    const Index n = 2 + static_cast<Index>(rng.below(5));
    std::vector<Index> dims;
    for (Index m = 0; m < V; ++m) dims.push_back(2 + static_cast<Index>(rng.below(4)));
    const Index min_dim = *std::min_element(dims.begin(), dims.end());
    const Index d = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(3, min_dim))));

    for (Index m = 0; m < V; ++m) {
        Matrix X(dims[m], n);
        for (Index c = 0; c < n; ++c)
            for (Index r = 0; r < dims[m]; ++r) X(r, c) = rng.normal();
        inst.ds.views.push_back(std::move(X));
    }
    inst.P = ProjectionStack::zeros(dims, d);
    for (Index r = 0; r < inst.P.P.rows(); ++r)
        for (Index c = 0; c < d; ++c) inst.P.P(r, c) = rng.normal() / std::sqrt(static_cast<double>(dims[0]));
    for (Index m = 0; m < V; ++m) {
        Matrix w(n, n);
        for (Index c = 0; c < n; ++c)
            for (Index r = 0; r < n; ++r) w(r, c) = rng.normal() / std::sqrt(static_cast<double>(n));
        inst.W.W.push_back(std::move(w));
    }

    inst.h = base;
    inst.h.d = d;
    if (randomize_hyper) {
        auto draw = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
        inst.h.lambda = draw(0.5, 1.5);
        inst.h.alpha = draw(0.5, 1.5);
        inst.h.beta = draw(0.5, 1.5);
        inst.h.tau1 = draw(0.5, 2.0);
        inst.h.tau2 = draw(0.5, 2.0);
    }
    return inst;
}

struct GradCheckRun
{
    std::uint64_t seed;
    Index num_views;
    Index num_samples;
    Index embed_dim;
    GradCheckReport report;
};

inline std::vector<GradCheckRun> run_gradcheck_suite(Index instances, std::uint64_t base_seed,
                                                     const Hyperparams& base, double step,
                                                     bool randomize_hyper = true)
{
    std::vector<GradCheckRun> runs;
    for (Index k = 0; k < instances; ++k) {
        const auto seed = base_seed + static_cast<std::uint64_t>(k);
        const auto inst = make_gradcheck_instance(seed, base, randomize_hyper);
        runs.push_back({seed, inst.ds.num_views(), inst.ds.num_samples(), inst.h.d,
                        check_gradients(inst.P, inst.W, inst.ds, inst.h, step)});
    }
    return runs;
}

} // namespace mfedch
