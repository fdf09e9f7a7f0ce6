#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cfscm/scm.hpp"

using namespace cfscm;

namespace {

CausalGraph chain3() {
    CausalGraph g;
    g.nodes = {"X1", "X2", "X3"};
    g.parents = {{}, {0}, {1}};
    return g;
}

double ks_statistic_uniform(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double ks = 0.0;
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double cdf = v[i];  // Uniform[0,1]
        ks = std::max(ks, std::abs((i + 1) / n - cdf));
        ks = std::max(ks, std::abs(i / n - cdf));
    }
    return ks;
}

}  // namespace

TEST_CASE("topological order on a chain") {
    auto order = topological_order(chain3());
    CHECK(order == std::vector<int>{0, 1, 2});
}

TEST_CASE("topological order, single node") {
    CausalGraph g;
    g.nodes = {"X1"};
    g.parents = {{}};
    CHECK(topological_order(g) == std::vector<int>{0});
}

TEST_CASE("cycle raises a structural error naming an edge") {
    CausalGraph g;
    g.nodes = {"X1", "X2"};
    g.parents = {{1}, {0}};
    CHECK_THROWS_AS(topological_order(g), GraphError);
    try {
        topological_order(g);
    } catch (const GraphError& e) {
        CHECK(std::string(e.what()).find("X") != std::string::npos);
    }
}

TEST_CASE("point-mass noise gives constant rows") {
    CausalGraph g;
    g.nodes = {"X1"};
    g.parents = {{}};
    std::vector<StructuralEquation> eqs = {[](const Row&, double u) { return u; }};
    std::vector<NoiseSampler> noise = {[](Rng&) { return 0.5; }};
    ClosedFormSCM scm(g, eqs, noise);
    Rng rng(1);
    auto data = scm.ancestral_sample(3, rng);
    for (auto& row : data) CHECK(row[0] == 0.5);
}

TEST_CASE("illustrative SCM: X2 | X1 >= 0.5 is Uniform[0,1] for every phi") {
    for (double phi : {0.0, 0.2, 0.5, 0.9}) {
        auto scm = illustrative_scm(phi);
        Rng rng(42);
        auto data = scm.ancestral_sample(10000, rng);
        std::vector<double> x2;
        for (auto& row : data)
            if (row[0] >= 0.5) x2.push_back(row[1]);
        CHECK(x2.size() > 4000);
        CHECK(ks_statistic_uniform(x2) < 0.02);
    }
}

TEST_CASE("noise replay reproduces sampled rows to 1e-12") {
    auto scm = benchmark_scm("nonadditive3");
    Rng rng(7);
    Dataset data, noise;
    scm.ancestral_sample(200, rng, data, noise);
    for (int i = 0; i < 200; ++i) {
        Row re = scm.replay(noise[i]);
        for (int v = 0; v < 3; ++v)
            CHECK(std::abs(re[v] - data[i][v]) <= 1e-12);
    }
}

TEST_CASE("apply_intervention pins targets and leaves the rest") {
    auto scm = illustrative_scm(0.3);
    auto iv_scm = scm.apply_intervention({{0}, {0.7}});
    Rng rng(3);
    auto data = iv_scm.ancestral_sample(50, rng);
    for (auto& row : data) CHECK(row[0] == 0.7);

    auto same = scm.apply_intervention(Intervention::none());
    Rng r1(11), r2(11);
    auto a = scm.ancestral_sample(20, r1);
    auto b = same.ancestral_sample(20, r2);
    CHECK(a == b);
}

TEST_CASE("do(X2) leaves the X1 marginal unchanged") {
    auto scm = illustrative_scm(0.3);
    auto iv_scm = scm.apply_intervention({{1}, {0.25}});
    Rng rng(5);
    auto data = iv_scm.ancestral_sample(2000, rng);
    double mean = 0.0;
    for (auto& row : data) {
        CHECK(row[1] == 0.25);
        mean += row[0];
    }
    mean /= 2000.0;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("intervention on unknown node is rejected") {
    auto scm = illustrative_scm(0.0);
    CHECK_THROWS_AS(scm.apply_intervention({{5}, {1.0}}), GraphError);
}

TEST_CASE("zeta_phi branches and identity") {
    CHECK(zeta_phi(0.8, 0.3) == doctest::Approx(0.1));
    CHECK(zeta_phi(0.2, 0.3) == doctest::Approx(0.5));
    CHECK(zeta_phi(0.37, 0.0) == 0.37);
    CHECK_THROWS(zeta_phi(1.5, 0.0));
}

TEST_CASE("zeta_phi is a measure-preserving bijection of [0,1)") {
    const int n = 1000;
    for (double phi : {0.25, 0.7}) {
        std::vector<double> image;
        for (int i = 0; i < n; ++i) {
            double u = i / static_cast<double>(n);
            double v = zeta_phi(u, phi);
            // inverse is a shift by -phi with the same wrap
            double back = zeta_phi(v, 1.0 - phi < 1.0 ? 1.0 - phi : 0.0);
            if (phi > 0.0) CHECK(back == doctest::Approx(u).epsilon(1e-12));
            image.push_back(v);
        }
        std::sort(image.begin(), image.end());
        for (int i = 0; i < n; ++i)
            CHECK(image[i] == doctest::Approx(i / static_cast<double>(n)).epsilon(1e-9));
    }
}

TEST_CASE("ground-truth counterfactual, Eq.-style arithmetic") {
    // factum (x1=0.25, x2=0.05) so u2 = 0.2
    Factum f;
    f.x = {0.25, 0.05};
    f.u = Row{0.25, 0.2};

    auto scm0 = illustrative_scm(0.0);
    Row cf0 = ground_truth_counterfactual(scm0, f, {{0}, {0.8}});
    CHECK(cf0[1] == doctest::Approx(0.2));

    auto scm5 = illustrative_scm(0.5);
    Row cf5 = ground_truth_counterfactual(scm5, f, {{0}, {0.8}});
    CHECK(cf5[1] == doctest::Approx(0.7));

    // factual intervention on all ancestors reproduces the factum
    Row same = ground_truth_counterfactual(scm5, f, {{0}, {0.25}});
    CHECK(same[0] == doctest::Approx(0.25));
    CHECK(same[1] == doctest::Approx(0.05));

    Factum no_noise;
    no_noise.x = {0.25, 0.05};
    CHECK_THROWS(ground_truth_counterfactual(scm0, no_noise, {{0}, {0.8}}));
}

TEST_CASE("linear3 with zero noise is exactly linear") {
    auto scm = benchmark_scm("linear3");
    Row u = {0.0, 0.0, 0.0};
    Row x = scm.replay(u);
    CHECK(x[0] == 0.0);
    CHECK(x[1] == 0.0);
    CHECK(x[2] == 0.0);
    u = {1.0, 0.0, 0.0};
    x = scm.replay(u);
    CHECK(x[1] == doctest::Approx(-1.0));
    CHECK(x[2] == doctest::Approx(0.0));
}

TEST_CASE("nonadditive3 has non-constant conditional variance across parent deciles") {
    auto scm = benchmark_scm("nonadditive3");
    Rng rng(13);
    auto data = scm.ancestral_sample(10000, rng);
    std::vector<std::pair<double, double>> pts;
    for (auto& row : data) pts.emplace_back(row[0], row[1]);
    std::sort(pts.begin(), pts.end());
    double vmin = 1e300, vmax = 0.0;
    const std::size_t per = pts.size() / 10;
    for (int dec = 0; dec < 10; ++dec) {
        double m = 0.0, m2 = 0.0;
        for (std::size_t i = dec * per; i < (dec + 1) * per; ++i) m += pts[i].second;
        m /= per;
        for (std::size_t i = dec * per; i < (dec + 1) * per; ++i)
            m2 += (pts[i].second - m) * (pts[i].second - m);
        double var = m2 / (per - 1);
        vmin = std::min(vmin, var);
        vmax = std::max(vmax, var);
    }
    CHECK(vmax / vmin > 2.0);
}

TEST_CASE("semisynth7 structure and label balance") {
    auto scm = benchmark_scm("semisynth7");
    CHECK(scm.graph().size() == 7);
    CHECK_NOTHROW(topological_order(scm.graph()));
    Rng rng(21);
    auto data = scm.ancestral_sample(10000, rng);
    std::vector<double> scores;
    for (auto& row : data) scores.push_back(scm.score(row));
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    double thr = sorted[sorted.size() / 2];
    double frac = 0.0;
    for (double s : scores) frac += (s > thr) ? 1.0 : 0.0;
    frac /= scores.size();
    CHECK(frac >= 0.2);
    CHECK(frac <= 0.8);
}

TEST_CASE("unknown benchmark name is rejected") {
    CHECK_THROWS(benchmark_scm("nope"));
}

TEST_CASE("intervention locality: non-descendant marginals unchanged") {
    auto scm = benchmark_scm("linear3");
    auto iv_scm = scm.apply_intervention({{1}, {2.0}});
    Rng r1(99), r2(100);
    auto a = scm.ancestral_sample(10000, r1);
    auto b = iv_scm.ancestral_sample(10000, r2);
    // X1 is a non-descendant of X2; compare means and variances
    double ma = 0, mb = 0, va = 0, vb = 0;
    for (int i = 0; i < 10000; ++i) {
        ma += a[i][0];
        mb += b[i][0];
    }
    ma /= 10000;
    mb /= 10000;
    for (int i = 0; i < 10000; ++i) {
        va += (a[i][0] - ma) * (a[i][0] - ma);
        vb += (b[i][0] - mb) * (b[i][0] - mb);
    }
    va /= 9999;
    vb /= 9999;
    CHECK(std::abs(ma - mb) < 0.05);
    CHECK(std::abs(va - vb) < 0.1);
}
