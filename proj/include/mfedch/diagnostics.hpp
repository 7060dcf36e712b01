#pragma once
#include <mfedch/dataset.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/losses.hpp>
#include <mfedch/rng.hpp>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mfedch {
namespace diagnostics {

// S = W + W^T - W W^T
inline Matrix scatter_matrix(const Matrix& W)
{
    if (W.rows() != W.cols()) fail(ErrorKind::shape, "scatter_matrix expects a square matrix");
    Matrix S = W + W.transpose();
    S.noalias() -= W * W.transpose();
    return S;
}

inline void require_unit_column_sums(const Matrix& W, double tol = 1e-8)
{
    if (W.rows() != W.cols()) fail(ErrorKind::shape, "coefficient matrix must be square");
    for (Index k = 0; k < W.cols(); ++k) {
        const double s = W.col(k).sum();
        if (!(std::abs(s - 1.0) <= tol))
            fail(ErrorKind::precondition, "column " + std::to_string(k) + " sums to " + std::to_string(s) +
                                              ", expected 1");
    }
}

// Rescales each column to sum to 1. Columns summing to ~0 cannot be fixed.
inline Matrix normalize_columns_l1(Matrix W, double min_abs_sum = 1e-12)
{
    for (Index k = 0; k < W.cols(); ++k) {
        const double s = W.col(k).sum();
        if (!(std::abs(s) > min_abs_sum))
            fail(ErrorKind::precondition, "column " + std::to_string(k) + " sums to ~0 and cannot be normalized");
        W.col(k) /= s;
    }
    return W;
}

// (I - W)(I - W)^T
inline Matrix residual_gram(const Matrix& W)
{
    const Matrix R = Matrix::Identity(W.rows(), W.cols()) - W;
    return R * R.transpose();
}

/*
 * max_k | sum_i [(I - W)(I - W)^T]_{ik} |. Vanishes when every column of W
 * sums to 1; the unchecked variant is for negative controls.
 */
inline double column_sum_residual_unchecked(const Matrix& W)
{
    return residual_gram(W).colwise().sum().cwiseAbs().maxCoeff();
}

inline double column_sum_residual(const Matrix& W)
{
    require_unit_column_sums(W);
    return column_sum_residual_unchecked(W);
}

/*
 * | tr(Y (I-W)(I-W)^T Y^T) - 1/2 sum_{i,k} ||y_i - y_k||^2 S_ik |
 * The two sides agree whenever the columns of W sum to 1.
 */
inline double laplacian_equivalence_gap(const Matrix& Y, const Matrix& W)
{
    require_unit_column_sums(W);
    if (Y.cols() != W.rows()) fail(ErrorKind::shape, "Y must have one column per row of W");
    const double lhs = (Y * residual_gram(W) * Y.transpose()).trace();
    const Matrix S = scatter_matrix(W);
    double rhs = 0.0;
    for (Index i = 0; i < Y.cols(); ++i)
        for (Index k = 0; k < Y.cols(); ++k) rhs += (Y.col(i) - Y.col(k)).squaredNorm() * S(i, k);
    return std::abs(lhs - 0.5 * rhs);
}

// Mean over (m, v != m, i) of cos(w_i^m, w_i^v), temperature 1.
inline double cross_view_alignment(const CoefficientSet& W, double norm_eps = 1e-12)
{
    const Index V = W.num_views();
    if (V < 2) fail(ErrorKind::size, "cross_view_alignment needs at least 2 views");
    const Index n = W.num_samples();
    double total = 0.0;
    for (Index m = 0; m < V; ++m)
        for (Index v = 0; v < V; ++v) {
            if (v == m) continue;
            for (Index i = 0; i < n; ++i) total += cosine_sim(W.W[m].col(i), W.W[v].col(i), 1.0, norm_eps);
        }
    return total / static_cast<double>(V * (V - 1) * n);
}

// Random n x n matrix whose columns each sum to exactly 1 (up to rounding).
inline Matrix random_column_stochastic_like(Rng& rng, Index n)
{
    Matrix W(n, n);
    for (Index c = 0; c < n; ++c) {
        for (Index r = 0; r < n; ++r) W(r, c) = rng.normal();
        // Shift so the sum is bounded away from 0 before rescaling.
        const double s = W.col(c).sum();
        W.col(c).array() += (1.0 - s) / static_cast<double>(n);
    }
    return normalize_columns_l1(W);
}

struct CheckRow
{
    std::string check;
    double value;
    double bound;
    bool pass;
};

struct IdentitySweep
{
    double max_column_sum_residual = 0.0;
    double max_scaled_laplacian_gap = 0.0; // gap / (1 + ||Y||_F^2)
    double max_scatter_asymmetry = 0.0;
    double negative_control_residual = 0.0;
};

/*
 * The column-sum and Laplacian identities over `trials` random
 * L1-normalized W (n in 2..8, d in 1..4), plus a fixed unnormalized
 * negative control.
 */
inline IdentitySweep run_identity_sweep(Index trials, std::uint64_t seed)
{
    IdentitySweep out;
    for (Index t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        const Index n = 2 + static_cast<Index>(rng.below(7));
        const Index d = 1 + static_cast<Index>(rng.below(4));
        const Matrix W = random_column_stochastic_like(rng, n);
        Matrix Y(d, n);
        for (Index c = 0; c < n; ++c)
            for (Index r = 0; r < d; ++r) Y(r, c) = rng.normal();
        out.max_column_sum_residual = std::max(out.max_column_sum_residual, column_sum_residual(W));
        out.max_scaled_laplacian_gap =
            std::max(out.max_scaled_laplacian_gap, laplacian_equivalence_gap(Y, W) / (1.0 + Y.squaredNorm()));
        const Matrix S = scatter_matrix(W);
        out.max_scatter_asymmetry = std::max(out.max_scatter_asymmetry, (S - S.transpose()).cwiseAbs().maxCoeff());
    }
    Rng rng(derive_seed(seed, 0xc0de));
    Matrix control(5, 5);
    for (Index c = 0; c < 5; ++c)
        for (Index r = 0; r < 5; ++r) control(r, c) = rng.normal();
    out.negative_control_residual = column_sum_residual_unchecked(control);
    return out;
}

inline std::vector<CheckRow> identity_rows(const IdentitySweep& s)
{
    return {
        {"column_sum_residual", s.max_column_sum_residual, 1e-10, s.max_column_sum_residual <= 1e-10},
        {"laplacian_equivalence_gap_scaled", s.max_scaled_laplacian_gap, 1e-8, s.max_scaled_laplacian_gap <= 1e-8},
        {"scatter_symmetry", s.max_scatter_asymmetry, 1e-12, s.max_scatter_asymmetry <= 1e-12},
        {"negative_control_residual", s.negative_control_residual, 1e-3, s.negative_control_residual > 1e-3},
    };
}

/*
 * Identity checks on trained coefficients: each W^m is L1-normalized (a
 * copy) and checked against the embedding Y^m of its view.
 */
inline std::vector<CheckRow> trained_rows(const CoefficientSet& W, const std::vector<Matrix>& Y)
{
    std::vector<CheckRow> rows;
    for (Index m = 0; m < W.num_views(); ++m) {
        const auto tag = std::to_string(m);
        Matrix Wn;
        try {
            Wn = normalize_columns_l1(W.W[m]);
        } catch (const Error&) {
            rows.push_back({"trained_normalizable_view" + tag, 0.0, 0.0, false});
            continue;
        }
        // Normalizing small column sums inflates entries; scale by ||W||_F^2.
        const double res = column_sum_residual(Wn) / (1.0 + Wn.squaredNorm());
        const double gap = laplacian_equivalence_gap(Y[m], Wn) / (1.0 + Y[m].squaredNorm());
        rows.push_back({"trained_column_sum_residual_scaled_view" + tag, res, 1e-10, res <= 1e-10});
        rows.push_back({"trained_laplacian_gap_scaled_view" + tag, gap, 1e-8, gap <= 1e-8});
    }
    return rows;
}

} // namespace diagnostics
} // namespace mfedch
