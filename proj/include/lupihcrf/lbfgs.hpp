#ifndef LUPIHCRF_LBFGS_HPP
#define LUPIHCRF_LBFGS_HPP

#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lupihcrf {

using Vector = Eigen::VectorXd;

/// Value-and-gradient callable: writes the gradient into its second
/// argument and returns the objective value.
using Objective = std::function<double(const Vector&, Vector&)>;

struct LbfgsOptions {
    int max_iters = 400;
    double grad_tol = 1e-5;  // infinity norm
    int memory = 10;
    double c1 = 1e-4;  // sufficient decrease
    double c2 = 0.9;   // curvature
    int max_linesearch = 40;
};

struct LbfgsIterate {
    int iter;
    double value;
    double grad_norm;
};

namespace detail {

// Strong Wolfe line search (bracket + zoom, Nocedal & Wright alg. 3.5/3.6).
// Returns the accepted step, or 0 on failure. f/g at the accepted point are
// left in fx/grad.
inline double wolfe_line_search(const Objective& obj, const Vector& x, const Vector& dir,
                                double& fx, Vector& grad, Vector& x_new,
                                const LbfgsOptions& opts) {
    const double f0 = fx;
    const double g0 = grad.dot(dir);
    if (g0 >= 0.0) return 0.0;  // not a descent direction

    auto eval = [&](double t, double& f, double& g) {
        x_new = x + t * dir;
        f = obj(x_new, grad);
        g = grad.dot(dir);
    };

    auto zoom = [&](double lo, double flo, double glo, double hi, double fhi) -> double {
        double f, g;
        for (int i = 0; i < opts.max_linesearch; ++i) {
            // Quadratic interpolation, guarded towards the midpoint.
            double t = lo - 0.5 * glo * (hi - lo) * (hi - lo) /
                                (fhi - flo - glo * (hi - lo));
            const double a = std::min(lo, hi), b = std::max(lo, hi);
            if (!(t > a + 0.1 * (b - a) && t < b - 0.1 * (b - a))) t = 0.5 * (lo + hi);
            eval(t, f, g);
            if (!std::isfinite(f) || f > f0 + opts.c1 * t * g0 || f >= flo) {
                hi = t;
                fhi = f;
            } else {
                if (std::abs(g) <= -opts.c2 * g0) return t;
                if (g * (hi - lo) >= 0.0) {
                    hi = lo;
                    fhi = flo;
                }
                lo = t;
                flo = f;
                glo = g;
            }
        }
        return 0.0;
    };

    double t_prev = 0.0, f_prev = f0, g_prev = g0;
    double t = 1.0;
    double accepted = 0.0;
    double f, g;
    for (int i = 0; i < opts.max_linesearch; ++i) {
        eval(t, f, g);
        if (!std::isfinite(f) || f > f0 + opts.c1 * t * g0 || (i > 0 && f >= f_prev)) {
            accepted = zoom(t_prev, f_prev, g_prev, t, f);
            break;
        }
        if (std::abs(g) <= -opts.c2 * g0) {
            accepted = t;
            break;
        }
        if (g >= 0.0) {
            accepted = zoom(t, f, g, t_prev, f_prev);
            break;
        }
        t_prev = t;
        f_prev = f;
        g_prev = g;
        t *= 2.0;
    }
    t = accepted;
    if (t <= 0.0) return 0.0;
    // Re-evaluate in case zoom's last trial was not the accepted point.
    eval(t, f, g);
    if (!std::isfinite(f) || f > f0) return 0.0;
    fx = f;
    return t;
}

}  // namespace detail

/// Limited-memory BFGS with two-loop recursion and a strong Wolfe line
/// search. Stops on gradient tolerance, iteration cap, or line-search
/// failure; accepted objective values are non-increasing.
inline std::pair<Vector, std::vector<LbfgsIterate>> lbfgs_minimize(const Objective& obj,
                                                                   const Vector& x0,
                                                                   const LbfgsOptions& opts) {
    Vector x = x0;
    Vector grad(x.size());
    double fx = obj(x, grad);
    if (!std::isfinite(fx) || !grad.allFinite())
        throw std::runtime_error("lbfgs: non-finite objective at the starting point");

    std::vector<LbfgsIterate> log;
    log.push_back({0, fx, grad.lpNorm<Eigen::Infinity>()});
    if (grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) return {x, log};

    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho_hist;
    Vector x_new(x.size());

    for (int iter = 1; iter <= opts.max_iters; ++iter) {
        // Two-loop recursion for the search direction.
        Vector q = grad;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const double gamma =
                s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Vector dir = -q;

        const Vector grad_old = grad;
        const Vector x_old = x;
        const double step = detail::wolfe_line_search(obj, x, dir, fx, grad, x_new, opts);
        if (step <= 0.0) break;  // line search failed; keep the best iterate
        x = x_new;

        const double gnorm = grad.lpNorm<Eigen::Infinity>();
        log.push_back({iter, fx, gnorm});
        if (gnorm <= opts.grad_tol) break;

        Vector s = x - x_old;
        Vector y = grad - grad_old;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
    }
    return {x, log};
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_LBFGS_HPP
