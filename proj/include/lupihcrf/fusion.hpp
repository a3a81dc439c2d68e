#ifndef LUPIHCRF_FUSION_HPP
#define LUPIHCRF_FUSION_HPP

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lupihcrf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Ridge map from regular features to privileged/attribute space:
/// gamma = (x'x + eta I)^-1 x'a, applied as f = x gamma.
struct FusionMap {
    Matrix gamma;  // d x p
    double eta = 0.0;
};

inline FusionMap fit_cls(const Matrix& x, const Matrix& a, double eta) {
    if (x.rows() != a.rows()) throw std::invalid_argument("fit_cls: row count mismatch");
    if (x.rows() < 1) throw std::invalid_argument("fit_cls: need at least one row");
    if (eta < 0.0) throw std::invalid_argument("fit_cls: eta must be >= 0");
    const Eigen::Index d = x.cols();
    Matrix gram = x.transpose() * x + eta * Matrix::Identity(d, d);
    if (eta == 0.0 && Eigen::FullPivLU<Matrix>(gram).rank() < d)
        throw std::runtime_error("fit_cls: singular system (eta = 0 and x'x not invertible)");
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw std::runtime_error("fit_cls: singular system (eta = 0 and x'x not invertible?)");
    FusionMap map;
    map.gamma = ldlt.solve(x.transpose() * a);
    map.eta = eta;
    // Sanity on the solve; a grossly singular system slips past LDLT's info().
    const double scale = std::max(1.0, (x.transpose() * a).cwiseAbs().maxCoeff());
    if ((gram * map.gamma - x.transpose() * a).cwiseAbs().maxCoeff() > 1e-6 * scale)
        throw std::runtime_error("fit_cls: singular system (eta = 0 and x'x not invertible?)");
    return map;
}

inline Matrix predict_privileged(const FusionMap& map, const Matrix& x) {
    if (x.cols() != map.gamma.rows())
        throw std::invalid_argument("predict_privileged: feature width mismatch");
    return x * map.gamma;
}

/// Cross-validated eta selection over a grid; ties resolve to the smaller
/// eta. Returns the winner plus the per-eta mean held-out squared error.
inline std::pair<double, std::vector<std::pair<double, double>>> select_eta(
    const Matrix& x, const Matrix& a, const std::vector<double>& grid, int k,
    std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("select_eta: empty grid");
    if (k < 2) throw std::invalid_argument("select_eta: need k >= 2");
    const int n = static_cast<int>(x.rows());
    if (k > n) throw std::invalid_argument("select_eta: k exceeds row count");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::pair<double, double>> table;
    double best_eta = grid.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (double eta : grid) {
        double total_err = 0.0;
        for (int f = 0; f < k; ++f) {
            std::vector<int> train, test;
            for (int i = 0; i < n; ++i)
                (i % k == f ? test : train).push_back(order[i]);
            Matrix xtr(train.size(), x.cols()), atr(train.size(), a.cols());
            for (std::size_t i = 0; i < train.size(); ++i) {
                xtr.row(i) = x.row(train[i]);
                atr.row(i) = a.row(train[i]);
            }
            const FusionMap map = fit_cls(xtr, atr, eta);
            double err = 0.0;
            for (int i : test) err += (x.row(i) * map.gamma - a.row(i)).squaredNorm();
            total_err += err;
        }
        const double mean_err = total_err / n;
        table.emplace_back(eta, mean_err);
        if (mean_err < best_err - 1e-15 ||
            (std::abs(mean_err - best_err) <= 1e-15 && eta < best_eta)) {
            best_err = mean_err;
            best_eta = eta;
        }
    }
    return {best_eta, table};
}

inline std::vector<double> default_eta_grid() {
    // 9 log-spaced points covering [1e-4, 1]
    std::vector<double> grid;
    for (int i = 0; i <= 8; ++i) grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
    return grid;
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_FUSION_HPP
