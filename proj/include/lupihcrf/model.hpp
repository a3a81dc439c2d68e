#ifndef LUPIHCRF_MODEL_HPP
#define LUPIHCRF_MODEL_HPP

#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lupihcrf/seqdata.hpp"

namespace lupihcrf {

struct HCRFConfig {
    int n_labels = 0;      // |Y|
    int n_states = 0;      // |H|
    int dim_regular = 0;   // width of the regular channel
    int dim_privileged = 0;

    void validate() const {
        if (n_labels < 2) throw std::invalid_argument("need at least 2 labels");
        if (n_states < 1) throw std::invalid_argument("need at least 1 hidden state");
        if (dim_regular < 1 || dim_privileged < 1)
            throw std::invalid_argument("feature dimensions must be >= 1");
    }
};

/// Full weight vector of the chain model, split into its four blocks:
///   theta1  per-(label, state) bias
///   theta2  state x regular-feature observation weights
///   theta3  state x privileged-feature weights
///   omega   per-label state-transition weights
/// pack/unpack give a fixed-order bijection with a flat vector
/// (theta1 row-major, theta2, theta3, then omega label by label).
struct ModelParams {
    Matrix theta1;               // n_labels x n_states
    Matrix theta2;               // n_states x dim_regular
    Matrix theta3;               // n_states x dim_privileged
    std::vector<Matrix> omega;   // n_labels matrices, n_states x n_states

    static ModelParams zeros(const HCRFConfig& cfg) {
        ModelParams p;
        p.theta1 = Matrix::Zero(cfg.n_labels, cfg.n_states);
        p.theta2 = Matrix::Zero(cfg.n_states, cfg.dim_regular);
        p.theta3 = Matrix::Zero(cfg.n_states, cfg.dim_privileged);
        p.omega.assign(cfg.n_labels, Matrix::Zero(cfg.n_states, cfg.n_states));
        return p;
    }

    static ModelParams random(const HCRFConfig& cfg, double scale, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, scale);
        Vector v = Vector::NullaryExpr(n_params(cfg), [&](Eigen::Index) { return gauss(rng); });
        return unpack(v, cfg);
    }

    static Eigen::Index n_params(const HCRFConfig& cfg) {
        return static_cast<Eigen::Index>(cfg.n_labels) * cfg.n_states +
               static_cast<Eigen::Index>(cfg.n_states) * cfg.dim_regular +
               static_cast<Eigen::Index>(cfg.n_states) * cfg.dim_privileged +
               static_cast<Eigen::Index>(cfg.n_labels) * cfg.n_states * cfg.n_states;
    }

    Vector pack() const {
        Eigen::Index total = theta1.size() + theta2.size() + theta3.size();
        for (const auto& m : omega) total += m.size();
        Vector v(total);
        Eigen::Index at = 0;
        auto put = [&](const Matrix& m) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) v(at++) = m(r, c);
        };
        put(theta1);
        put(theta2);
        put(theta3);
        for (const auto& m : omega) put(m);
        return v;
    }

    static ModelParams unpack(const Vector& v, const HCRFConfig& cfg) {
        if (v.size() != n_params(cfg))
            throw std::invalid_argument("parameter vector length does not match config");
        ModelParams p = zeros(cfg);
        Eigen::Index at = 0;
        auto take = [&](Matrix& m) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v(at++);
        };
        take(p.theta1);
        take(p.theta2);
        take(p.theta3);
        for (auto& m : p.omega) take(m);
        return p;
    }
};

/// Per-frame unary score tables, one T x |H| matrix per label:
/// entry (j, a) = theta1(label, a) + theta2.row(a) . x_j [+ theta3.row(a) . x*_j].
/// The privileged term is exactly zero when the channel is absent.
inline std::vector<Matrix> unary_scores(const ModelParams& params, const HCRFConfig& cfg,
                                        const Matrix& frames,
                                        const Matrix* privileged = nullptr) {
    if (frames.cols() != cfg.dim_regular)
        throw std::invalid_argument("frame width does not match config");
    Matrix base = frames * params.theta2.transpose();  // T x H
    if (privileged) {
        if (privileged->rows() != frames.rows() || privileged->cols() != cfg.dim_privileged)
            throw std::invalid_argument("privileged shape does not match config");
        base += *privileged * params.theta3.transpose();
    }
    std::vector<Matrix> tables(cfg.n_labels);
    for (int y = 0; y < cfg.n_labels; ++y)
        tables[y] = base.rowwise() + params.theta1.row(y);
    return tables;
}

inline const Matrix& pairwise_scores(const ModelParams& params, const HCRFConfig& cfg,
                                     int label) {
    if (label < 0 || label >= cfg.n_labels)
        throw std::invalid_argument("label out of range");
    return params.omega[label];
}

/// Total score of one (label, state path) configuration on the chain.
inline double energy(const ModelParams& params, const HCRFConfig& cfg, int label,
                     const std::vector<int>& states, const Matrix& frames,
                     const Matrix* privileged = nullptr) {
    if (static_cast<Eigen::Index>(states.size()) != frames.rows())
        throw std::invalid_argument("state path length does not match frames");
    const auto tables = unary_scores(params, cfg, frames, privileged);
    const Matrix& trans = pairwise_scores(params, cfg, label);
    double e = 0.0;
    for (std::size_t j = 0; j < states.size(); ++j) {
        if (states[j] < 0 || states[j] >= cfg.n_states)
            throw std::invalid_argument("state index out of range");
        e += tables[label](j, states[j]);
        if (j + 1 < states.size()) e += trans(states[j], states[j + 1]);
    }
    return e;
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_MODEL_HPP
