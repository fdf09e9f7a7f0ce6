#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cfscm/flow.hpp"

using namespace cfscm;
using Eigen::VectorXd;

namespace {

VectorXd random_phi(const FlowConfig& cfg, unsigned seed, double scale = 0.5) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd(0.0, scale);
    VectorXd phi(cfg.param_count());
    for (int i = 0; i < phi.size(); ++i) phi[i] = nd(gen);
    return phi;
}

VectorXd random_parents(int d, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    VectorXd p(d);
    for (int i = 0; i < d; ++i) p[i] = nd(gen);
    return p;
}

}  // namespace

TEST_CASE("zero parameters give the identity spline") {
    FlowConfig cfg{.bins = 6, .bound = 2.0, .hidden_dims = 5, .input_dim = 2};
    VectorXd phi = VectorXd::Zero(cfg.param_count());
    VectorXd pa = random_parents(2, 1);
    auto kn = conditioner(pa, phi, cfg);
    for (int i = 0; i < cfg.bins; ++i) {
        CHECK(kn.widths[i] == doctest::Approx(2.0 * cfg.bound / cfg.bins));
        CHECK(kn.heights[i] == doctest::Approx(2.0 * cfg.bound / cfg.bins));
    }
    for (int i = 0; i <= cfg.bins; ++i)
        CHECK(kn.derivs[i] == doctest::Approx(1.0).epsilon(1e-12));
    for (double x : {-1.9, -0.3, 0.0, 0.7, 1.99, 5.0}) {
        auto [z, ld] = g_forward(x, pa, phi, cfg);
        CHECK(z == doctest::Approx(x).epsilon(1e-12));
        CHECK(std::abs(ld) < 1e-12);
        CHECK(g_inverse(x, pa, phi, cfg) == doctest::Approx(x).epsilon(1e-12));
    }
}

TEST_CASE("knot normalization holds for arbitrary parameters") {
    FlowConfig cfg{.bins = 8, .bound = 3.0, .hidden_dims = 7, .input_dim = 3};
    for (unsigned seed = 0; seed < 10; ++seed) {
        VectorXd phi = random_phi(cfg, seed, 1.0);
        auto kn = conditioner(random_parents(3, seed + 50), phi, cfg);
        CHECK(kn.widths.sum() == doctest::Approx(2.0 * cfg.bound).epsilon(1e-10));
        CHECK(kn.heights.sum() == doctest::Approx(2.0 * cfg.bound).epsilon(1e-10));
        CHECK(kn.widths.minCoeff() > 0.0);
        CHECK(kn.heights.minCoeff() > 0.0);
        CHECK(kn.derivs.minCoeff() > 0.0);
    }
}

TEST_CASE("root-node conditioner is deterministic and bias-driven") {
    FlowConfig cfg{.bins = 4, .bound = 1.0, .hidden_dims = 3, .input_dim = 0};
    VectorXd phi = random_phi(cfg, 3);
    VectorXd empty(0);
    auto a = conditioner(empty, phi, cfg);
    auto b = conditioner(empty, phi, cfg);
    CHECK(a.widths == b.widths);
    CHECK(a.heights == b.heights);
    CHECK(a.derivs == b.derivs);
}

TEST_CASE("tail convention: identity outside the box") {
    FlowConfig cfg{.bins = 8, .bound = 2.0, .hidden_dims = 6, .input_dim = 1};
    VectorXd phi = random_phi(cfg, 7);
    VectorXd pa = random_parents(1, 8);
    for (double x : {-5.0, -2.01, 2.01, 10.0}) {
        auto [z, ld] = g_forward(x, pa, phi, cfg);
        CHECK(z == x);
        CHECK(ld == 0.0);
    }
}

TEST_CASE("log-derivative agrees with central finite differences") {
    FlowConfig cfg{.bins = 8, .bound = 3.0, .hidden_dims = 6, .input_dim = 2};
    const double h = 1e-6;
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> ux(-2.8, 2.8);
    for (unsigned seed = 0; seed < 20; ++seed) {
        VectorXd phi = random_phi(cfg, 100 + seed);
        VectorXd pa = random_parents(2, 200 + seed);
        double x = ux(gen);
        auto [z, ld] = g_forward(x, pa, phi, cfg);
        double zp = g_forward(x + h, pa, phi, cfg).first;
        double zm = g_forward(x - h, pa, phi, cfg).first;
        double fd = std::log((zp - zm) / (2.0 * h));
        CHECK(std::abs(ld - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
        CHECK(std::isfinite(z));
    }
}

TEST_CASE("round trip over 10^4 random configurations") {
    FlowConfig cfg{.bins = 8, .bound = 3.0, .hidden_dims = 6, .input_dim = 2};
    std::mt19937 gen(42);
    std::uniform_real_distribution<double> ux(-4.0, 4.0);
    double max_err = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        VectorXd phi = random_phi(cfg, 1000 + trial);
        VectorXd pa = random_parents(2, 2000 + trial);
        for (int i = 0; i < 100; ++i) {
            double x = ux(gen);
            double z = g_forward(x, pa, phi, cfg).first;
            double back = g_inverse(z, pa, phi, cfg);
            max_err = std::max(max_err, std::abs(back - x));
        }
    }
    CHECK(max_err < 1e-8);
}

TEST_CASE("strict monotonicity on a fine grid") {
    FlowConfig cfg{.bins = 8, .bound = 2.5, .hidden_dims = 6, .input_dim = 1};
    for (unsigned seed = 0; seed < 5; ++seed) {
        VectorXd phi = random_phi(cfg, 300 + seed, 1.5);
        VectorXd pa = random_parents(1, 400 + seed);
        double prev = -1e300;
        for (int i = 0; i <= 1000; ++i) {
            double x = -3.0 + 6.0 * i / 1000.0;
            double z = g_forward(x, pa, phi, cfg).first;
            CHECK(z > prev);
            prev = z;
        }
        // inverse preserves ordering too
        double prev_x = -1e300;
        for (int i = 0; i <= 200; ++i) {
            double z = -3.0 + 6.0 * i / 200.0;
            double x = g_inverse(z, pa, phi, cfg);
            CHECK(x > prev_x);
            prev_x = x;
        }
    }
}

TEST_CASE("parameter gradients: zero upstream gives zero gradient") {
    FlowConfig cfg{.bins = 4, .bound = 2.0, .hidden_dims = 4, .input_dim = 1};
    VectorXd phi = random_phi(cfg, 5);
    VectorXd pa = random_parents(1, 6);
    VectorXd g = flow_param_gradients(0.3, pa, phi, cfg, 0.0, 0.0);
    CHECK(g.norm() == 0.0);
}

TEST_CASE("parameter gradients match central finite differences") {
    FlowConfig cfg{.bins = 4, .bound = 2.0, .hidden_dims = 4, .input_dim = 2};
    const double h = 1e-5;
    for (unsigned seed = 0; seed < 20; ++seed) {
        VectorXd phi = random_phi(cfg, 500 + seed);
        VectorXd pa = random_parents(2, 600 + seed);
        std::mt19937 gen(700 + seed);
        std::uniform_real_distribution<double> ux(-1.8, 1.8);
        double x = ux(gen);
        // generic upstream weights exercise both outputs at once
        const double wz = 0.7, wld = -1.3;
        VectorXd grad = flow_param_gradients(x, pa, phi, cfg, wz, wld);
        for (int j = 0; j < phi.size(); j += 3) {
            VectorXd lo = phi, hi = phi;
            lo[j] -= h;
            hi[j] += h;
            auto fl = g_forward(x, pa, lo, cfg);
            auto fh = g_forward(x, pa, hi, cfg);
            double fd = (wz * (fh.first - fl.first) +
                         wld * (fh.second - fl.second)) /
                        (2.0 * h);
            CHECK(std::abs(grad[j] - fd) / std::max(1.0, std::abs(fd)) < 1e-4);
        }
    }
}

TEST_CASE("gradient of the log-determinant alone matches finite differences") {
    FlowConfig cfg{.bins = 4, .bound = 2.0, .hidden_dims = 3, .input_dim = 1};
    const double h = 1e-5;
    for (unsigned seed = 0; seed < 5; ++seed) {
        VectorXd phi = random_phi(cfg, 800 + seed);
        VectorXd pa = random_parents(1, 900 + seed);
        double x = 0.4 + 0.1 * seed;
        VectorXd grad = flow_param_gradients(x, pa, phi, cfg, 0.0, 1.0);
        for (int j = 0; j < phi.size(); j += 2) {
            VectorXd lo = phi, hi = phi;
            lo[j] -= h;
            hi[j] += h;
            double fd = (g_forward(x, pa, hi, cfg).second -
                         g_forward(x, pa, lo, cfg).second) /
                        (2.0 * h);
            CHECK(std::abs(grad[j] - fd) / std::max(1.0, std::abs(fd)) < 1e-4);
        }
    }
}

TEST_CASE("change of variables: standard normal pushed through the flow") {
    // NLL of samples x = g^{-1}(z), z ~ N(0,1), computed with g and its
    // Jacobian, must match the entropy-style MC estimate -mean log p(z) - mean logdet.
    FlowConfig cfg{.bins = 6, .bound = 4.0, .hidden_dims = 5, .input_dim = 0};
    VectorXd phi = random_phi(cfg, 77, 0.8);
    VectorXd pa(0);
    std::mt19937 gen(123);
    std::normal_distribution<double> nd;
    const int n = 100000;
    double nll = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = nd(gen);
        double x = g_inverse(z, pa, phi, cfg);
        auto [z2, ld] = g_forward(x, pa, phi, cfg);
        // density of x: log p(x) = log N(z2) + ld
        nll += -(-0.5 * z2 * z2 - 0.5 * std::log(2.0 * M_PI) + ld);
        CHECK(std::abs(z2 - z) < 1e-7);
    }
    nll /= n;
    // oracle: same expectation written in z-space, E[-log N(z) - logdet(g(x(z)))]
    std::mt19937 gen2(456);
    double oracle = 0.0, oracle_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = nd(gen2);
        double x = g_inverse(z, pa, phi, cfg);
        double ld = g_forward(x, pa, phi, cfg).second;
        double v = 0.5 * z * z + 0.5 * std::log(2.0 * M_PI) - ld;
        oracle += v;
        oracle_sq += v * v;
    }
    oracle /= n;
    double se = std::sqrt((oracle_sq / n - oracle * oracle) / n);
    CHECK(std::abs(nll - oracle) < 3.0 * se + 1e-9);
}
