#ifndef LUPIHCRF_OBJECTIVE_HPP
#define LUPIHCRF_OBJECTIVE_HPP

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lupihcrf/chain.hpp"
#include "lupihcrf/model.hpp"
#include "lupihcrf/seqdata.hpp"

namespace lupihcrf {

namespace detail {

// Accumulate the expected sufficient statistics of one sequence under one
// class's marginals, scaled by `weight`, into the gradient blocks.
inline void accumulate_stats(const ChainMarginals& m, int label, const Matrix& frames,
                             const Matrix* privileged, double weight, Matrix& g_theta1,
                             Matrix& g_theta2, Matrix& g_theta3,
                             std::vector<Matrix>& g_omega) {
    g_theta1.row(label) += weight * m.unary.colwise().sum();
    g_theta2 += weight * (m.unary.transpose() * frames);
    if (privileged) g_theta3 += weight * (m.unary.transpose() * *privileged);
    for (const auto& slice : m.pairwise) g_omega[label] += weight * slice;
}

}  // namespace detail

/// Regularized negative log-likelihood of the labeled dataset and its exact
/// gradient. The data gradient is the difference between free expectations
/// (label marginalized under the posterior) and clamped expectations (label
/// fixed to ground truth); the Gaussian prior adds w / sigma^2.
inline std::pair<double, Vector> nll_and_grad(const ModelParams& params,
                                              const HCRFConfig& cfg, const Dataset& data,
                                              double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("sigma must be > 0");
    if (!data.has_privileged())
        throw std::invalid_argument("privileged features required for training");

    double nll = 0.0;
    Matrix g_theta1 = Matrix::Zero(cfg.n_labels, cfg.n_states);
    Matrix g_theta2 = Matrix::Zero(cfg.n_states, cfg.dim_regular);
    Matrix g_theta3 = Matrix::Zero(cfg.n_states, cfg.dim_privileged);
    std::vector<Matrix> g_omega(cfg.n_labels, Matrix::Zero(cfg.n_states, cfg.n_states));

    for (const auto& s : data.samples) {
        if (!s.privileged)
            throw std::invalid_argument("sample '" + s.id + "' lacks privileged features");
        const Matrix* priv = &*s.privileged;
        const auto tables = unary_scores(params, cfg, s.frames, priv);

        std::vector<ChainMarginals> per_label(cfg.n_labels);
        Vector logz(cfg.n_labels);
        for (int y = 0; y < cfg.n_labels; ++y) {
            per_label[y] = forward_backward(tables[y], pairwise_scores(params, cfg, y));
            logz(y) = per_label[y].log_partition;
        }
        const double log_total = logsumexp(logz);
        nll += log_total - logz(s.label);
        if (!std::isfinite(nll))
            throw std::runtime_error("non-finite likelihood at sample '" + s.id + "'");

        // Free expectations, weighted by the class posterior.
        for (int y = 0; y < cfg.n_labels; ++y) {
            const double post = std::exp(logz(y) - log_total);
            detail::accumulate_stats(per_label[y], y, s.frames, priv, post, g_theta1,
                                     g_theta2, g_theta3, g_omega);
        }
        // Clamped expectations at the true label.
        detail::accumulate_stats(per_label[s.label], s.label, s.frames, priv, -1.0,
                                 g_theta1, g_theta2, g_theta3, g_omega);
    }

    ModelParams grad;
    grad.theta1 = g_theta1;
    grad.theta2 = g_theta2;
    grad.theta3 = g_theta3;
    grad.omega = std::move(g_omega);

    const Vector w = params.pack();
    const double inv_var = 1.0 / (sigma * sigma);
    Vector g = grad.pack() + inv_var * w;
    const double value = nll + 0.5 * inv_var * w.squaredNorm();
    return {value, std::move(g)};
}

/// Central finite differences of a scalar objective; gradient test oracle.
inline Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                               const Vector& at, double step) {
    if (step <= 0.0) throw std::invalid_argument("step must be > 0");
    Vector g(at.size());
    Vector probe = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        probe(i) = at(i) + step;
        const double fp = f(probe);
        probe(i) = at(i) - step;
        const double fm = f(probe);
        probe(i) = at(i);
        g(i) = (fp - fm) / (2.0 * step);
    }
    return g;
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_OBJECTIVE_HPP
