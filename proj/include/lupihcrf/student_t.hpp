#ifndef LUPIHCRF_STUDENT_T_HPP
#define LUPIHCRF_STUDENT_T_HPP

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

namespace lupihcrf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline Eigen::LLT<Matrix> checked_llt(const Matrix& sigma, const std::string& what) {
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + sigma.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(what + " is not symmetric");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(what + " is not positive definite");
    return llt;
}

/// log density of St(v; mu, sigma, nu) given a precomputed Cholesky factor.
inline double t_logpdf(const Vector& mu, const Eigen::LLT<Matrix>& llt, double nu,
                       const Vector& v) {
    const double M = static_cast<double>(mu.size());
    const Vector diff = v - mu;
    const double delta = llt.matrixL().solve(diff).squaredNorm();  // Mahalanobis^2
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        log_det += 2.0 * std::log(llt.matrixL()(i, i));
    return std::lgamma(0.5 * (nu + M)) - std::lgamma(0.5 * nu) -
           0.5 * M * std::log(nu * M_PI) - 0.5 * log_det -
           0.5 * (nu + M) * std::log1p(delta / nu);
}

}  // namespace detail

/// Joint Student's t over the stacked (privileged, regular) frame vector;
/// the privileged block occupies the first dim_privileged components.
struct StudentTJoint {
    Vector mu;
    Matrix sigma;
    double nu = 0.0;
    int dim_privileged = 0;

    int dim() const { return static_cast<int>(mu.size()); }
    int dim_regular() const { return dim() - dim_privileged; }
};

struct ConditionalT {
    Vector mu_star;
    Matrix sigma_star;
    double nu_star = 0.0;
};

inline double logpdf(const StudentTJoint& model, const Vector& v) {
    if (v.size() != model.mu.size())
        throw std::invalid_argument("logpdf: dimension mismatch");
    auto llt = detail::checked_llt(model.sigma, "sigma");
    return detail::t_logpdf(model.mu, llt, model.nu, v);
}

inline double logpdf(const ConditionalT& cond, const Vector& v) {
    auto llt = detail::checked_llt(cond.sigma_star, "sigma_star");
    return detail::t_logpdf(cond.mu_star, llt, cond.nu_star, v);
}

/// Marginal over the regular block: also Student's t, with the joint nu.
inline double marginal_regular_logpdf(const StudentTJoint& model, const Vector& x) {
    const int p = model.dim_privileged, q = model.dim_regular();
    auto llt = detail::checked_llt(model.sigma.block(p, p, q, q), "sigma_22");
    return detail::t_logpdf(model.mu.tail(q), llt, model.nu, x);
}

struct TFitOptions {
    int max_iters = 200;
    double tol = 1e-8;
    double nu_lo = 0.5;
    double nu_hi = 1e6;
    double fixed_nu = 0.0;  // > 0 pins the degrees of freedom (Gaussian-like at 1e6)
};

struct TFitLog {
    std::vector<double> loglik;  // one entry per EM iteration
    int jitter_events = 0;
};

namespace detail {

// CML nu update (ECME flavor): root of the observed log-likelihood's
// stationarity condition in nu, with mu and Sigma held at their fresh
// values. Converges far faster than the plain EM nu step.
inline double solve_nu(const std::vector<double>& deltas, double M, double lo, double hi) {
    using boost::math::digamma;
    auto f = [&](double nu) {
        double mean_log_u_minus_u = 0.0;
        for (double delta : deltas) {
            const double u = (nu + M) / (nu + delta);
            mean_log_u_minus_u += std::log(u) - u;
        }
        mean_log_u_minus_u /= deltas.size();
        return -digamma(0.5 * nu) + std::log(0.5 * nu) + 1.0 + mean_log_u_minus_u +
               digamma(0.5 * (nu + M)) - std::log(0.5 * (nu + M));
    };
    if (f(hi) >= 0.0) return hi;
    if (f(lo) <= 0.0) return lo;
    double a = lo, b = hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(a * b);  // bisect in log space
        if (f(mid) > 0.0)
            a = mid;
        else
            b = mid;
    }
    return std::sqrt(a * b);
}

}  // namespace detail

/// EM fit of a multivariate t on pooled frame vectors. E-step computes the
/// outlier-damping weights u_i = (nu+M)/(nu+delta_i); M-step takes the
/// weighted mean, the (1/N)-scaled weighted scatter, and a 1-D root-find
/// for nu. Log-likelihood is non-decreasing across iterations.
inline StudentTJoint fit_em(const std::vector<Vector>& samples, int dim_privileged,
                            const TFitOptions& opts = {}, TFitLog* log = nullptr) {
    if (samples.empty()) throw std::invalid_argument("fit_em: no samples");
    const int M = static_cast<int>(samples.front().size());
    const int N = static_cast<int>(samples.size());
    if (N <= M)
        throw std::invalid_argument("fit_em: need more samples than dimensions");
    if (dim_privileged < 0 || dim_privileged > M)
        throw std::invalid_argument("fit_em: bad privileged dimension");

    StudentTJoint model;
    model.dim_privileged = dim_privileged;
    model.mu = Vector::Zero(M);
    for (const auto& v : samples) model.mu += v;
    model.mu /= N;
    model.sigma = Matrix::Zero(M, M);
    for (const auto& v : samples) {
        const Vector d = v - model.mu;
        model.sigma += d * d.transpose();
    }
    model.sigma /= N;
    for (int d = 0; d < M; ++d)
        if (model.sigma(d, d) < 1e-12)
            throw std::invalid_argument("degenerate sample covariance: dimension " +
                                        std::to_string(d) + " has zero variance");
    model.nu = opts.fixed_nu > 0.0 ? opts.fixed_nu : 10.0;

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        Eigen::LLT<Matrix> llt(model.sigma);
        if (llt.info() != Eigen::Success) {
            model.sigma += (1e-8 * model.sigma.trace() / M) * Matrix::Identity(M, M);
            llt.compute(model.sigma);
            if (log) ++log->jitter_events;
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("fit_em: scale matrix became singular");
        }

        // E-step
        double ll = 0.0, sum_u = 0.0;
        std::vector<double> u(N);
        for (int i = 0; i < N; ++i) {
            const double delta = llt.matrixL().solve(samples[i] - model.mu).squaredNorm();
            u[i] = (model.nu + M) / (model.nu + delta);
            sum_u += u[i];
            ll += detail::t_logpdf(model.mu, llt, model.nu, samples[i]);
        }
        if (log) log->loglik.push_back(ll);
        if (iter > 0 && ll - prev_ll < opts.tol * (1.0 + std::abs(ll))) break;
        prev_ll = ll;

        // M-step
        Vector mu_new = Vector::Zero(M);
        for (int i = 0; i < N; ++i) mu_new += u[i] * samples[i];
        mu_new /= sum_u;
        Matrix sigma_new = Matrix::Zero(M, M);
        for (int i = 0; i < N; ++i) {
            const Vector d = samples[i] - mu_new;
            sigma_new += u[i] * d * d.transpose();
        }
        sigma_new /= N;
        model.mu = mu_new;
        model.sigma = 0.5 * (sigma_new + sigma_new.transpose());
        if (opts.fixed_nu <= 0.0) {
            Eigen::LLT<Matrix> llt_new(model.sigma);
            if (llt_new.info() == Eigen::Success) {
                std::vector<double> deltas(N);
                for (int i = 0; i < N; ++i)
                    deltas[i] =
                        llt_new.matrixL().solve(samples[i] - model.mu).squaredNorm();
                model.nu = detail::solve_nu(deltas, M, opts.nu_lo, opts.nu_hi);
            }
        }
    }
    return model;
}

/// Analytic conditional of the privileged block given an observed regular
/// vector. The scale inflates with the Mahalanobis distance of the
/// conditioning value; nu_star = nu + dim_regular.
inline ConditionalT condition(const StudentTJoint& model, const Vector& x) {
    const int p = model.dim_privileged, q = model.dim_regular();
    if (x.size() != q) throw std::invalid_argument("condition: regular dimension mismatch");
    const Matrix sigma11 = model.sigma.block(0, 0, p, p);
    const Matrix sigma12 = model.sigma.block(0, p, p, q);
    const Matrix sigma22 = model.sigma.block(p, p, q, q);
    auto llt22 = detail::checked_llt(sigma22, "sigma_22");
    const Vector diff = x - model.mu.tail(q);
    const Vector solved = llt22.solve(diff);
    const double delta = diff.dot(solved);

    ConditionalT cond;
    cond.mu_star = model.mu.head(p) + sigma12 * solved;
    Matrix schur = sigma11 - sigma12 * llt22.solve(sigma12.transpose());
    cond.sigma_star = ((model.nu + delta) / (model.nu + q)) * 0.5 * (schur + schur.transpose());
    cond.nu_star = model.nu + q;
    return cond;
}

inline Vector conditional_mean(const ConditionalT& cond) {
    if (cond.nu_star <= 1.0)
        throw std::invalid_argument("conditional mean undefined for nu_star <= 1");
    return cond.mu_star;
}

/// Seeded draws: v = mu* + L z sqrt(nu*/g), g ~ chi^2(nu*).
inline Matrix sample(const ConditionalT& cond, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    auto llt = detail::checked_llt(cond.sigma_star, "sigma_star");
    const Matrix L = llt.matrixL();
    const int p = static_cast<int>(cond.mu_star.size());

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::chi_squared_distribution<double> chi2(cond.nu_star);
    Matrix out(n, p);
    Vector z(p);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < p; ++d) z(d) = gauss(rng);
        const double g = chi2(rng);
        out.row(i) = (cond.mu_star + L * z * std::sqrt(cond.nu_star / g)).transpose();
    }
    return out;
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_STUDENT_T_HPP
