#pragma once
#include <mfedch/errors.hpp>
#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

namespace mfedch {

struct Hyperparams
{
    Eigen::Index d = 2;      // embedding dimension
    double lambda = 1.0;     // weight of the structural head
    double alpha = 1.0;      // self-reconstruction weight
    double beta = 1.0;       // ridge weight on W
    double tau1 = 1.0;       // sample-level temperature
    double tau2 = 1.0;       // structural-level temperature
    double gamma = 1e-3;     // Adam learning rate
    double b1 = 0.9;
    double b2 = 0.999;
    double eps_adam = 1e-8;
    double norm_eps = 1e-12; // added to every cosine denominator
    double tol = 1e-3;       // stop when |L_t - L_{t+1}| <= tol
    long max_iters = 500;
};

namespace detail {

inline void require_positive(double value, const char* name)
{
    if (!(value > 0.0)) fail(ErrorKind::config, std::string(name) + " must be > 0, got " + std::to_string(value));
}

inline void require_open_unit(double value, const char* name)
{
    if (!(value > 0.0 && value < 1.0))
        fail(ErrorKind::config, std::string(name) + " must lie in (0, 1), got " + std::to_string(value));
}

} // namespace detail

/*
 * Checks the positivity constraints and, when view dimensions are given,
 * d <= min D_m.
 */
inline void validate(const Hyperparams& h, const std::vector<Eigen::Index>& view_dims = {})
{
    if (h.d < 1) fail(ErrorKind::config, "d must be >= 1, got " + std::to_string(h.d));
    detail::require_positive(h.lambda, "lambda");
    detail::require_positive(h.alpha, "alpha");
    detail::require_positive(h.beta, "beta");
    detail::require_positive(h.tau1, "tau1");
    detail::require_positive(h.tau2, "tau2");
    detail::require_positive(h.gamma, "gamma");
    detail::require_open_unit(h.b1, "beta1");
    detail::require_open_unit(h.b2, "beta2");
    detail::require_positive(h.eps_adam, "eps_adam");
    detail::require_positive(h.norm_eps, "norm_eps");
    detail::require_positive(h.tol, "tol");
    if (h.max_iters < 1) fail(ErrorKind::config, "max_iters must be >= 1, got " + std::to_string(h.max_iters));
    for (std::size_t m = 0; m < view_dims.size(); ++m) {
        if (h.d > view_dims[m]) {
            fail(ErrorKind::config, "d=" + std::to_string(h.d) + " exceeds dimension " +
                                        std::to_string(view_dims[m]) + " of view " + std::to_string(m));
        }
    }
}

} // namespace mfedch
