#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cfscm/gp.hpp"

using namespace cfscm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_inputs(int n, int d, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = nd(gen);
    return x;
}

VectorXd random_targets(int n, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = nd(gen);
    return y;
}

// brute-force oracle: dense inverse and determinant, no Cholesky path
double dense_log_marginal(const MatrixXd& X, const VectorXd& y,
                          const KernelParams& p) {
    MatrixXd K = se_kernel_matrix(X, p);
    K.diagonal().array() += p.noise_variance();
    MatrixXd Kinv = K.inverse();
    double logdet = std::log(K.determinant());
    return -0.5 * y.dot(Kinv * y) - 0.5 * logdet -
           0.5 * y.size() * std::log(2.0 * M_PI);
}

}  // namespace

TEST_CASE("se_kernel closed forms") {
    KernelParams p = KernelParams::isotropic(1);
    VectorXd x(1), y(1);
    x << 0.0;
    y << 0.0;
    CHECK(se_kernel(x, x, p) == doctest::Approx(1.0));
    y << 1.0;
    CHECK(se_kernel(x, y, p) == doctest::Approx(std::exp(-0.5)));
    y << 20.0;
    CHECK(se_kernel(x, y, p) < 1e-12);
    VectorXd bad(2);
    CHECK_THROWS(se_kernel(x, bad, p));
}

TEST_CASE("1x1 fit solves alpha in closed form") {
    KernelParams p = KernelParams::isotropic(1);  // k(x,x)=1, sigma^2=1
    MatrixXd X(1, 1);
    X << 0.0;
    VectorXd y(1);
    y << 2.0;
    auto m = gp_fit(X, y, p);
    CHECK(m.alpha[0] == doctest::Approx(1.0));
    // zero residual: only the determinant and constant terms remain
    auto m0 = gp_fit(X, VectorXd::Zero(1), p);
    CHECK(gp_log_marginal(m0) ==
          doctest::Approx(-0.5 * std::log(2.0) - 0.5 * std::log(2.0 * M_PI))
              .epsilon(1e-9));
}

TEST_CASE("Cholesky factor reconstructs K + sigma^2 I") {
    KernelParams p = KernelParams::isotropic(2, -0.3, 0.2, -1.0);
    auto X = random_inputs(20, 2, 1);
    auto y = random_targets(20, 2);
    auto m = gp_fit(X, y, p);
    MatrixXd K = se_kernel_matrix(X, p);
    K.diagonal().array() += p.noise_variance();
    MatrixXd rec = m.chol * m.chol.transpose();
    double rel = (rec - K).cwiseAbs().maxCoeff() / K.cwiseAbs().maxCoeff();
    CHECK(rel < 1e-8);
}

TEST_CASE("duplicate inputs with zero noise engage the jitter path") {
    KernelParams p = KernelParams::isotropic(1, 0.0, 0.0, -700.0);  // sigma^2 ~ 0
    MatrixXd X(6, 1);
    X << 0.0, 0.0, 1.0, 1.0, 2.0, 2.0;
    VectorXd y = VectorXd::LinSpaced(6, 0.0, 1.0);
    auto m = gp_fit(X, y, p);
    CHECK(m.jitter > 0.0);
    CHECK(std::isfinite(gp_log_marginal(m)));
}

TEST_CASE("log marginal matches the dense oracle") {
    KernelParams p = KernelParams::isotropic(3, 0.1, -0.2, -0.7);
    auto X = random_inputs(10, 3, 5);
    auto y = random_targets(10, 6);
    auto m = gp_fit(X, y, p);
    double ours = gp_log_marginal(m);
    double oracle = dense_log_marginal(X, y, p);
    CHECK(std::abs(ours - oracle) / std::abs(oracle) < 1e-9);
}

TEST_CASE("predictive posterior: interpolation and prior reversion") {
    KernelParams p = KernelParams::isotropic(1, 0.0, 0.0, std::log(1e-12));
    MatrixXd X(3, 1);
    X << -1.0, 0.0, 1.0;
    VectorXd y(3);
    y << 0.3, -0.2, 0.6;
    auto m = gp_fit(X, y, p);
    VectorXd xs(1);
    xs << 0.0;
    auto post = gp_predict(m, xs);
    CHECK(std::abs(post.mean - (-0.2)) < 1e-5);
    CHECK(post.variance < 1e-6);

    xs << 20.0;  // 20 lengthscales away
    post = gp_predict(m, xs);
    CHECK(std::abs(post.mean) < 1e-8);
    CHECK(post.variance == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("predictive posterior matches a dense oracle") {
    KernelParams p = KernelParams::isotropic(2, -0.1, 0.3, -1.2);
    auto X = random_inputs(10, 2, 9);
    auto y = random_targets(10, 10);
    auto m = gp_fit(X, y, p);
    VectorXd xs(2);
    xs << 0.4, -0.3;

    MatrixXd K = se_kernel_matrix(X, p);
    K.diagonal().array() += p.noise_variance();
    MatrixXd Kinv = K.inverse();
    VectorXd kstar(10);
    for (int i = 0; i < 10; ++i)
        kstar[i] = se_kernel(X.row(i).transpose(), xs, p);
    double mean = kstar.dot(Kinv * y);
    double var = p.signal_variance() - kstar.dot(Kinv * kstar);

    auto post = gp_predict(m, xs);
    CHECK(post.mean == doctest::Approx(mean).epsilon(1e-9));
    CHECK(post.variance == doctest::Approx(var).epsilon(1e-9));
}

TEST_CASE("noise posterior: single-factum closed form") {
    // no training data: model holds only the factum row
    KernelParams p = KernelParams::isotropic(1);  // k=1, sigma^2=1
    MatrixXd X(1, 1);
    X << 0.0;
    VectorXd y(1);
    y << 2.0;
    auto m = gp_fit(X, y, p);
    auto np = gp_noise_posterior(m);
    CHECK(np.mean == doctest::Approx(1.0));       // sigma^2 y / (k + sigma^2)
    CHECK(np.variance == doctest::Approx(0.5));   // sigma^2 (1 - sigma^2/(k+sigma^2))
}

TEST_CASE("noise posterior vanishes with the noise variance") {
    KernelParams p = KernelParams::isotropic(1, 0.0, 0.0, std::log(1e-10));
    MatrixXd X(4, 1);
    X << -1.5, -0.5, 0.5, 1.5;
    VectorXd y(4);
    y << 0.1, -0.4, 0.2, 0.9;
    auto m = gp_fit(X, y, p);
    auto np = gp_noise_posterior(m);
    CHECK(std::abs(np.mean) < 1e-8);
    CHECK(np.variance < 1e-8);
}

TEST_CASE("noise posterior decomposition: predictive mean + mu = factum target") {
    KernelParams p = KernelParams::isotropic(1, -0.2, 0.1, -0.9);
    auto X = random_inputs(12, 1, 20);
    auto y = random_targets(12, 21);
    auto m = gp_fit(X, y, p);  // last row plays the factum
    auto np = gp_noise_posterior(m);
    auto post = gp_predict(m, X.row(11).transpose());
    CHECK(post.mean + np.mean == doctest::Approx(y[11]).epsilon(1e-9));
}

TEST_CASE("noise posterior matches the dense brute-force oracle") {
    for (unsigned seed = 0; seed < 5; ++seed) {
        int n = 10 + static_cast<int>(seed) * 5;  // up to 30
        KernelParams p = KernelParams::isotropic(2, -0.1, 0.2, -0.8);
        auto X = random_inputs(n, 2, 100 + seed);
        auto y = random_targets(n, 200 + seed);
        auto m = gp_fit(X, y, p);
        auto np = gp_noise_posterior(m);

        MatrixXd K = se_kernel_matrix(X, p);
        double sn = p.noise_variance();
        MatrixXd Kn = K;
        Kn.diagonal().array() += sn;
        MatrixXd Kinv = Kn.inverse();
        double mu = sn * (Kinv * y)(n - 1);
        double var = sn * (1.0 - sn * Kinv(n - 1, n - 1));
        CHECK(np.mean == doctest::Approx(mu).epsilon(1e-9));
        CHECK(np.variance == doctest::Approx(var).epsilon(1e-9));
        CHECK(np.variance >= 0.0);
        CHECK(np.variance <= sn);
    }
}

TEST_CASE("posterior variance never exceeds the prior variance") {
    KernelParams p = KernelParams::isotropic(1, 0.0, 0.4, -1.0);
    auto X = random_inputs(15, 1, 33);
    auto y = random_targets(15, 34);
    auto m = gp_fit(X, y, p);
    for (double t = -5.0; t <= 5.0; t += 0.25) {
        VectorXd xs(1);
        xs << t;
        CHECK(gp_predict(m, xs).variance <= p.signal_variance() + 1e-12);
    }
}

TEST_CASE("log marginal gradient matches central finite differences") {
    const double h = 1e-5;
    for (unsigned seed = 0; seed < 3; ++seed) {
        KernelParams p = KernelParams::isotropic(2, 0.1, -0.3, -0.5);
        auto X = random_inputs(12, 2, 300 + seed);
        auto y = random_targets(12, 400 + seed);
        auto m = gp_fit(X, y, p);
        VectorXd grad = gp_log_marginal_gradient(m);

        auto eval = [&](const KernelParams& q) {
            return gp_log_marginal(gp_fit(X, y, q));
        };
        for (int j = 0; j < p.n_params(); ++j) {
            KernelParams lo = p, hi = p;
            auto bump = [&](KernelParams& q, double delta) {
                if (j < p.dim())
                    q.log_lengthscales[j] += delta;
                else if (j == p.dim())
                    q.log_signal_variance += delta;
                else
                    q.log_noise_variance += delta;
            };
            bump(lo, -h);
            bump(hi, h);
            double fd = (eval(hi) - eval(lo)) / (2.0 * h);
            CHECK(std::abs(grad[j] - fd) / std::max(1.0, std::abs(fd)) < 1e-4);
        }
    }
}
