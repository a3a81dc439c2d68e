#include <catch2/catch_amalgamated.hpp>

#include "lupihcrf/lbfgs.hpp"

using namespace lupihcrf;

TEST_CASE("diagonal quadratic converges to its center") {
    Vector center(4), diag(4);
    center << 1.0, -2.0, 0.5, 3.0;
    diag << 1.0, 4.0, 0.25, 10.0;
    Objective obj = [&](const Vector& v, Vector& g) {
        g = diag.cwiseProduct(v - center);
        return 0.5 * (v - center).dot(g);
    };
    LbfgsOptions opts;
    opts.grad_tol = 1e-10;
    const auto [x, log] = lbfgs_minimize(obj, Vector::Zero(4), opts);
    CHECK((x - center).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(log.back().iter <= 50);
}

TEST_CASE("Rosenbrock from the classic start") {
    Objective obj = [](const Vector& v, Vector& g) {
        const double x = v(0), y = v(1);
        g.resize(2);
        g(0) = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
        g(1) = 200.0 * (y - x * x);
        return (1.0 - x) * (1.0 - x) + 100.0 * (y - x * x) * (y - x * x);
    };
    Vector x0(2);
    x0 << -1.2, 1.0;
    LbfgsOptions opts;
    opts.grad_tol = 1e-10;
    const auto [x, log] = lbfgs_minimize(obj, x0, opts);
    CHECK(log.back().value < 1e-8);
    CHECK((x - Vector::Ones(2)).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(log.back().iter <= 400);
}

TEST_CASE("already-optimal start returns immediately") {
    Objective obj = [](const Vector& v, Vector& g) {
        g = v;
        return 0.5 * v.squaredNorm();
    };
    const auto [x, log] = lbfgs_minimize(obj, Vector::Zero(3), {});
    CHECK(x == Vector::Zero(3));
    CHECK(log.size() == 1);
    CHECK(log.back().iter == 0);
}

TEST_CASE("accepted values are non-increasing") {
    Objective obj = [](const Vector& v, Vector& g) {
        // ill-conditioned quartic bowl
        g.resize(2);
        g(0) = 4.0 * std::pow(v(0), 3) + 0.01 * v(1);
        g(1) = 200.0 * v(1) + 0.01 * v(0);
        return std::pow(v(0), 4) + 100.0 * v(1) * v(1) + 0.01 * v(0) * v(1);
    };
    Vector x0(2);
    x0 << 3.0, -5.0;
    const auto [x, log] = lbfgs_minimize(obj, x0, {});
    for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i].value <= log[i - 1].value);
    CHECK(log.back().value < 1e-6);
}

TEST_CASE("non-finite start is rejected") {
    Objective obj = [](const Vector& v, Vector& g) {
        g = v;
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS(lbfgs_minimize(obj, Vector::Ones(2), {}));
}

TEST_CASE("iteration cap is honored") {
    Objective obj = [](const Vector& v, Vector& g) {
        g = 2.0 * v;
        return v.squaredNorm();
    };
    LbfgsOptions opts;
    opts.max_iters = 3;
    opts.grad_tol = 0.0;
    const auto [x, log] = lbfgs_minimize(obj, Vector::Constant(2, 100.0), opts);
    CHECK(log.back().iter <= 3);
}
