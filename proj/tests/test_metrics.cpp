#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cfscm/metrics.hpp"
#include "cfscm/rng.hpp"

using namespace cfscm;

namespace {

Dataset normal_sample(int n, double mean, unsigned seed) {
    Rng rng(seed);
    Dataset out(n, Row(1));
    for (auto& r : out) r[0] = mean + rng.normal();
    return out;
}

}  // namespace

TEST_CASE("median heuristic closed cases") {
    Dataset two = {{0.0}, {2.0}};
    CHECK(median_heuristic(two) == doctest::Approx(2.0));

    Dataset same = {{1.0}, {1.0}, {1.0}};
    CHECK_THROWS(median_heuristic(same));

    // homogeneity: scaling the points scales the bandwidth
    Dataset pts = normal_sample(50, 0.0, 1);
    Dataset scaled = pts;
    for (auto& r : scaled) r[0] *= 3.0;
    CHECK(median_heuristic(scaled) ==
          doctest::Approx(3.0 * median_heuristic(pts)).epsilon(1e-12));
}

TEST_CASE("median heuristic matches a brute-force pairwise median") {
    Dataset pts = normal_sample(1500, 0.0, 2);
    std::vector<double> dists;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            dists.push_back(std::abs(pts[i][0] - pts[j][0]));
    std::sort(dists.begin(), dists.end());
    double brute = dists[dists.size() / 2];
    CHECK(std::abs(median_heuristic(pts) - brute) / brute < 1e-6);
    // pooled standard normal differences are N(0,2): median |x-y| near
    // 1.349/2 * sqrt(2) quantile form, i.e. sqrt(2) * 0.6745
    CHECK(brute == doctest::Approx(std::sqrt(2.0) * 0.6745).epsilon(0.05));
}

TEST_CASE("mmd basics") {
    Dataset x = normal_sample(500, 0.0, 3);
    CHECK(mmd2(x, x, 1.0) == doctest::Approx(0.0).epsilon(1e-12));

    Dataset y = normal_sample(1000, 0.0, 4);
    Dataset z = normal_sample(1000, 0.0, 5);
    CHECK(mmd2(y, z, 1.0) < 0.02);
    CHECK(mmd(y, z, 1.0) < 0.05);

    // symmetry and non-negativity
    Dataset far = normal_sample(300, 3.0, 6);
    double a = mmd2(y, far, 1.0), b = mmd2(far, y, 1.0);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(a >= 0.0);
}

TEST_CASE("mmd grows monotonically with the mean shift") {
    Dataset base = normal_sample(1000, 0.0, 7);
    double prev = -1.0;
    for (int shift : {0, 1, 2, 3}) {
        Dataset moved = normal_sample(1000, shift, 100 + shift);
        double v = mmd(base, moved, 1.0);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(prev > 0.5);
}

TEST_CASE("cf_variance closed cases") {
    Dataset constant(10, Row{1.0, 2.0});
    CHECK(cf_variance(constant) == doctest::Approx(0.0));

    Dataset pts = {{0.0, 1.0}, {2.0, 3.0}, {4.0, -1.0}, {1.0, 0.0}};
    double base = cf_variance(pts);
    Dataset doubled = pts;
    for (auto& r : doubled)
        for (auto& v : r) v *= 2.0;
    CHECK(cf_variance(doubled) == doctest::Approx(4.0 * base).epsilon(1e-12));

    // intervened coordinates are excluded per row
    std::vector<std::vector<int>> iv(pts.size(), std::vector<int>{0});
    double only_second = cf_variance(pts, iv);
    Dataset second_only;
    for (const auto& r : pts) second_only.push_back({r[1]});
    CHECK(only_second == doctest::Approx(cf_variance(second_only)).epsilon(1e-12));
}
