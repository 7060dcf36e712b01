#pragma once
#include <mfedch/dataset.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/hyperparams.hpp>
#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mfedch {

/*
 * Stacked projection P = [P_1; ...; P_V] (D x d). Block m is P_m (D_m x d).
 */
struct ProjectionStack
{
    Matrix P;
    std::vector<Index> offsets;
    std::vector<Index> dims;

    static ProjectionStack zeros(const std::vector<Index>& view_dims, Index d)
    {
        ProjectionStack s;
        Index acc = 0;
        for (auto dm : view_dims) {
            s.offsets.push_back(acc);
            s.dims.push_back(dm);
            acc += dm;
        }
        s.P = Matrix::Zero(acc, d);
        return s;
    }

    Index num_views() const { return static_cast<Index>(dims.size()); }
    Index embed_dim() const { return P.cols(); }

    auto block(Index m) { return P.middleRows(offsets[m], dims[m]); }
    auto block(Index m) const { return P.middleRows(offsets[m], dims[m]); }
};

// Per-view self-reconstruction matrices W^m (n x n); column i is w_i^m.
struct CoefficientSet
{
    std::vector<Matrix> W;

    Index num_views() const { return static_cast<Index>(W.size()); }
    Index num_samples() const { return W.empty() ? 0 : W.front().cols(); }
};

// How positives and negatives are drawn for the sample-level head.
enum class Pairing {
    cmc, // positives: same sample in other views; negatives: other samples in other views
};

inline void check_compatible(const ProjectionStack& P, const MultiViewDataset& ds)
{
    check_aligned(ds);
    if (P.num_views() != ds.num_views())
        fail(ErrorKind::shape, "projection has " + std::to_string(P.num_views()) + " views, data has " +
                                   std::to_string(ds.num_views()));
    for (Index m = 0; m < ds.num_views(); ++m) {
        if (P.dims[m] != ds.views[m].rows())
            fail(ErrorKind::shape, "projection block " + std::to_string(m) + " expects " +
                                       std::to_string(P.dims[m]) + " features, data has " +
                                       std::to_string(ds.views[m].rows()));
    }
    if (P.P.rows() != ds.total_dim()) fail(ErrorKind::shape, "projection row count does not match D");
}

inline void check_compatible(const CoefficientSet& W, const MultiViewDataset& ds)
{
    if (W.num_views() != ds.num_views()) fail(ErrorKind::shape, "coefficient set view count mismatch");
    for (const auto& w : W.W) {
        if (w.rows() != ds.num_samples() || w.cols() != ds.num_samples())
            fail(ErrorKind::shape, "coefficient matrix must be n x n");
    }
}

/*
 * Temperature-scaled cosine similarity
 *     u.v / ((|u| |v| + norm_eps) * tau).
 */
inline double cosine_sim(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v,
                         double tau, double norm_eps)
{
    if (u.size() != v.size())
        fail(ErrorKind::shape, "cosine_sim length mismatch: " + std::to_string(u.size()) + " vs " +
                                   std::to_string(v.size()));
    return u.dot(v) / ((u.norm() * v.norm() + norm_eps) * tau);
}

// All pairwise similarities: S(i, k) = sim(A.col(i), B.col(k)).
inline Matrix similarity_matrix(const Matrix& A, const Matrix& B, double tau, double norm_eps)
{
    const Vector na = A.colwise().norm().transpose();
    const Vector nb = B.colwise().norm().transpose();
    Matrix S = A.transpose() * B;
    S.array() /= ((na * nb.transpose()).array() + norm_eps) * tau;
    return S;
}

// Max-shifted log(sum(exp(x))).
template <class Derived>
inline double log_sum_exp(const Eigen::DenseBase<Derived>& x)
{
    if (x.size() == 0) return -std::numeric_limits<double>::infinity();
    const double mx = x.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((x.derived().array() - mx).exp().sum());
}

inline std::vector<Matrix> embed(const ProjectionStack& P, const MultiViewDataset& ds)
{
    std::vector<Matrix> Y;
    Y.reserve(ds.views.size());
    for (Index m = 0; m < ds.num_views(); ++m) Y.push_back(P.block(m).transpose() * ds.views[m]);
    return Y;
}

namespace detail {

inline void require_finite(double value, const char* what, Index m, Index i)
{
    if (!std::isfinite(value))
        fail(ErrorKind::numeric, std::string(what) + ": non-finite term at view " + std::to_string(m) +
                                     " anchor " + std::to_string(i));
}

// sims[v] = S^{m v} for v != m; sims[m] is unused.
inline std::vector<Matrix> cross_view_sims(const std::vector<Matrix>& cols, Index m, double tau, double norm_eps)
{
    std::vector<Matrix> sims(cols.size());
    for (std::size_t v = 0; v < cols.size(); ++v)
        if (static_cast<Index>(v) != m) sims[v] = similarity_matrix(cols[m], cols[v], tau, norm_eps);
    return sims;
}

} // namespace detail

/*
 * Sample-level InfoNCE on precomputed embeddings Y_m (d x n).
 *
 * For anchor y_i^m the positives are y_i^v (v != m) and the negatives are
 * y_k^v (v != m, k != i). Each anchor contributes
 *     log sum_{v != m, k} e^{s_ik^{mv}} - log sum_{v != m} e^{s_ii^{mv}},
 * averaged over i and summed over m.
 */
inline double sample_infonce_embedded(const std::vector<Matrix>& Y, double tau, double norm_eps,
                                      Pairing pairing = Pairing::cmc)
{
    (void)pairing;
    const auto V = static_cast<Index>(Y.size());
    if (V == 0) return 0.0;
    const Index n = Y.front().cols();
    double total = 0.0;
    Vector pos(V - 1);
    Vector all((V - 1) * n);
    for (Index m = 0; m < V; ++m) {
        const auto sims = detail::cross_view_sims(Y, m, tau, norm_eps);
        double view_sum = 0.0;
        for (Index i = 0; i < n; ++i) {
            Index p = 0;
            for (Index v = 0; v < V; ++v) {
                if (v == m) continue;
                pos(p) = sims[v](i, i);
                all.segment(p * n, n) = sims[v].row(i).transpose();
                ++p;
            }
            const double term = log_sum_exp(all) - log_sum_exp(pos);
            detail::require_finite(term, "sample_infonce", m, i);
            view_sum += term;
        }
        total += view_sum / static_cast<double>(n);
    }
    return total;
}

inline double sample_infonce(const ProjectionStack& P, const MultiViewDataset& ds, const Hyperparams& h)
{
    check_compatible(P, ds);
    return sample_infonce_embedded(embed(P, ds), h.tau1, h.norm_eps);
}

/*
 * Structural contrastive term: for every ordered view pair (m, v), v != m,
 * the mean over i of  -log( e^{sim(w_i^m, w_i^v)} / sum_k e^{sim(w_i^m, w_k^v)} ).
 */
inline double structural_contrastive(const CoefficientSet& W, const Hyperparams& h)
{
    const Index V = W.num_views();
    const Index n = W.num_samples();
    double total = 0.0;
    for (Index m = 0; m < V; ++m) {
        for (Index v = 0; v < V; ++v) {
            if (v == m) continue;
            const Matrix S = similarity_matrix(W.W[m], W.W[v], h.tau2, h.norm_eps);
            double pair_sum = 0.0;
            for (Index i = 0; i < n; ++i) {
                const double term = log_sum_exp(S.row(i)) - S(i, i);
                detail::require_finite(term, "structural_contrastive", m, i);
                pair_sum += term;
            }
            total += pair_sum / static_cast<double>(n);
        }
    }
    return total;
}

// sum_m  alpha ||Y^m - Y^m W^m||_F^2 + beta ||W^m||_F^2,  Y^m = P_m^T X^m.
inline double reconstruction_penalty(const ProjectionStack& P, const MultiViewDataset& ds,
                                     const CoefficientSet& W, const Hyperparams& h)
{
    check_compatible(P, ds);
    check_compatible(W, ds);
    double total = 0.0;
    for (Index m = 0; m < ds.num_views(); ++m) {
        const Matrix Y = P.block(m).transpose() * ds.views[m];
        total += h.alpha * (Y - Y * W.W[m]).squaredNorm() + h.beta * W.W[m].squaredNorm();
    }
    return total;
}

// sample_infonce + lambda * (structural_contrastive + reconstruction_penalty)
inline double total_loss(const ProjectionStack& P, const CoefficientSet& W, const MultiViewDataset& ds,
                         const Hyperparams& h)
{
    const double sample = sample_infonce(P, ds, h);
    const double structural = structural_contrastive(W, h);
    const double recon = reconstruction_penalty(P, ds, W, h);
    const double total = sample + h.lambda * (structural + recon);
    if (!std::isfinite(total)) fail(ErrorKind::numeric, "total_loss is not finite");
    return total;
}

} // namespace mfedch
