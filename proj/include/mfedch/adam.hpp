#pragma once
#include <mfedch/errors.hpp>
#include <mfedch/hyperparams.hpp>
#include <Eigen/Core>
#include <cmath>

namespace mfedch {

struct AdamState
{
    Eigen::VectorXd m1;
    Eigen::VectorXd m2;
    long t = 0;

    AdamState() = default;
    explicit AdamState(Eigen::Index size)
        : m1(Eigen::VectorXd::Zero(size)), m2(Eigen::VectorXd::Zero(size))
    {}
};

/*
 * One bias-corrected Adam step, in place:
 *     m1 <- b1 m1 + (1 - b1) g,   m2 <- b2 m2 + (1 - b2) g^2,
 *     param <- param - gamma * (m1 / (1 - b1^t)) / (sqrt(m2 / (1 - b2^t)) + eps).
 */
inline void adam_step(Eigen::Ref<Eigen::VectorXd> param, const Eigen::Ref<const Eigen::VectorXd>& grad,
                      AdamState& st, const Hyperparams& h)
{
    if (param.size() != grad.size() || st.m1.size() != grad.size())
        fail(ErrorKind::shape, "adam_step: parameter, gradient and state sizes differ");
    if (!grad.allFinite()) fail(ErrorKind::numeric, "adam_step: non-finite gradient");
    ++st.t;
    st.m1 = h.b1 * st.m1 + (1.0 - h.b1) * grad;
    st.m2 = h.b2 * st.m2 + (1.0 - h.b2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(h.b1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(h.b2, static_cast<double>(st.t));
    param.array() -= h.gamma * (st.m1.array() / c1) / ((st.m2.array() / c2).sqrt() + h.eps_adam);
}

} // namespace mfedch
