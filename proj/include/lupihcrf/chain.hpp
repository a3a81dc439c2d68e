#ifndef LUPIHCRF_CHAIN_HPP
#define LUPIHCRF_CHAIN_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lupihcrf/model.hpp"

namespace lupihcrf {

inline double logsumexp(const Vector& values) {
    if (values.size() == 0) throw std::invalid_argument("logsumexp of empty vector");
    const double m = values.maxCoeff();
    if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf/NaN propagates)
    return m + std::log((values.array() - m).exp().sum());
}

/// Exact chain posteriors for one class: log-partition plus the unary and
/// pairwise hidden-state marginals the gradient needs.
struct ChainMarginals {
    double log_partition = 0.0;
    Matrix unary;                  // T x |H|, rows sum to 1
    std::vector<Matrix> pairwise;  // T-1 slices, |H| x |H|, each sums to 1
};

/// Forward-backward in the log domain over one class's unary table and
/// transition matrix. On a chain this is exact belief propagation.
inline ChainMarginals forward_backward(const Matrix& unary, const Matrix& trans) {
    const Eigen::Index T = unary.rows(), H = unary.cols();
    if (trans.rows() != H || trans.cols() != H)
        throw std::invalid_argument("transition matrix shape mismatch");

    Matrix alpha(T, H), beta(T, H);
    alpha.row(0) = unary.row(0);
    for (Eigen::Index j = 1; j < T; ++j)
        for (Eigen::Index b = 0; b < H; ++b)
            alpha(j, b) = unary(j, b) +
                          logsumexp(alpha.row(j - 1).transpose() + trans.col(b));
    beta.row(T - 1).setZero();
    for (Eigen::Index j = T - 2; j >= 0; --j)
        for (Eigen::Index a = 0; a < H; ++a)
            beta(j, a) = logsumexp(trans.row(a).transpose() +
                                   unary.row(j + 1).transpose() + beta.row(j + 1).transpose());

    ChainMarginals m;
    m.log_partition = logsumexp(alpha.row(T - 1).transpose());
    m.unary = ((alpha + beta).array() - m.log_partition).exp().matrix();
    m.pairwise.reserve(T > 0 ? T - 1 : 0);
    for (Eigen::Index j = 0; j + 1 < T; ++j) {
        Matrix slice(H, H);
        for (Eigen::Index a = 0; a < H; ++a)
            for (Eigen::Index b = 0; b < H; ++b)
                slice(a, b) = std::exp(alpha(j, a) + trans(a, b) + unary(j + 1, b) +
                                       beta(j + 1, b) - m.log_partition);
        m.pairwise.push_back(std::move(slice));
    }
    return m;
}

inline ChainMarginals class_log_partition(const ModelParams& params, const HCRFConfig& cfg,
                                          int label, const Matrix& frames,
                                          const Matrix* privileged = nullptr) {
    const auto tables = unary_scores(params, cfg, frames, privileged);
    return forward_backward(tables[label], pairwise_scores(params, cfg, label));
}

/// Log class posterior: per-class log-partitions normalized over labels.
inline Vector class_posterior(const ModelParams& params, const HCRFConfig& cfg,
                              const Matrix& frames, const Matrix* privileged = nullptr) {
    const auto tables = unary_scores(params, cfg, frames, privileged);
    Vector logz(cfg.n_labels);
    for (int y = 0; y < cfg.n_labels; ++y)
        logz(y) = forward_backward(tables[y], pairwise_scores(params, cfg, y)).log_partition;
    return logz.array() - logsumexp(logz);
}

/// Exhaustive enumeration over all |H|^T state paths. Test oracle for the
/// recursive inference; refuses instances above 10^6 paths.
inline std::pair<Vector, Vector> brute_force_posterior(const ModelParams& params,
                                                       const HCRFConfig& cfg,
                                                       const Matrix& frames,
                                                       const Matrix* privileged = nullptr) {
    const int T = static_cast<int>(frames.rows());
    const int H = cfg.n_states;
    double n_paths = std::pow(static_cast<double>(H), T);
    if (n_paths > 1e6) throw std::invalid_argument("instance too large for brute force");

    Vector logz(cfg.n_labels);
    std::vector<int> path(T, 0);
    for (int y = 0; y < cfg.n_labels; ++y) {
        std::vector<double> energies;
        energies.reserve(static_cast<std::size_t>(n_paths));
        std::fill(path.begin(), path.end(), 0);
        while (true) {
            energies.push_back(energy(params, cfg, y, path, frames, privileged));
            int j = T - 1;
            while (j >= 0 && ++path[j] == H) path[j--] = 0;
            if (j < 0) break;
        }
        logz(y) = logsumexp(Eigen::Map<Vector>(energies.data(), energies.size()));
    }
    Vector log_post = logz.array() - logsumexp(logz);
    return {log_post, logz};
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_CHAIN_HPP
