#include "cfscm/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfscm {

using Eigen::MatrixXd;

namespace {

MatrixXd to_matrix(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("empty sample set");
    MatrixXd m(data.size(), data[0].size());
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < data[0].size(); ++j) m(i, j) = data[i][j];
    return m;
}

// sum of kernel values over all pairs of rows (X, Y), blockwise
double kernel_pair_sum(const MatrixXd& x, const MatrixXd& y, double bw2) {
    const int block = 1024;
    Eigen::VectorXd xs = x.rowwise().squaredNorm();
    Eigen::VectorXd ys = y.rowwise().squaredNorm();
    double total = 0.0;
    for (int i = 0; i < x.rows(); i += block) {
        int bi = std::min<int>(block, x.rows() - i);
        for (int j = 0; j < y.rows(); j += block) {
            int bj = std::min<int>(block, y.rows() - j);
            MatrixXd d2 = -2.0 * x.middleRows(i, bi) * y.middleRows(j, bj).transpose();
            d2.colwise() += xs.segment(i, bi);
            d2.rowwise() += ys.segment(j, bj).transpose();
            total += (-d2.cwiseMax(0.0) / (2.0 * bw2)).array().exp().sum();
        }
    }
    return total;
}

}  // namespace

double median_heuristic(const Dataset& pooled) {
    if (pooled.size() < 2) throw std::invalid_argument("need at least two points");
    MatrixXd m = to_matrix(pooled);
    const int limit = 2000;
    if (m.rows() > limit) {
        // deterministic strided subsample
        MatrixXd sub(limit, m.cols());
        double step = static_cast<double>(m.rows()) / limit;
        for (int i = 0; i < limit; ++i)
            sub.row(i) = m.row(static_cast<int>(i * step));
        m = sub;
    }
    std::vector<double> dists;
    dists.reserve(m.rows() * (m.rows() - 1) / 2);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.rows(); ++j)
            dists.push_back((m.row(i) - m.row(j)).norm());
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    double med = dists[dists.size() / 2];
    if (med <= 0.0)
        throw std::invalid_argument("median pairwise distance is zero");
    return med;
}

double mmd2(const Dataset& x, const Dataset& y, double bandwidth) {
    if (bandwidth <= 0.0) throw std::invalid_argument("bandwidth must be positive");
    MatrixXd mx = to_matrix(x), my = to_matrix(y);
    if (mx.cols() != my.cols()) throw std::invalid_argument("dimension mismatch");
    const double bw2 = bandwidth * bandwidth;
    double kxx = kernel_pair_sum(mx, mx, bw2) / (double(mx.rows()) * mx.rows());
    double kyy = kernel_pair_sum(my, my, bw2) / (double(my.rows()) * my.rows());
    double kxy = kernel_pair_sum(mx, my, bw2) / (double(mx.rows()) * my.rows());
    return std::max(kxx + kyy - 2.0 * kxy, 0.0);
}

double mmd(const Dataset& x, const Dataset& y, double bandwidth) {
    return std::sqrt(mmd2(x, y, bandwidth));
}

double cf_variance(const Dataset& samples,
                   const std::vector<std::vector<int>>& intervened) {
    if (samples.size() < 2) throw std::invalid_argument("need at least two samples");
    if (!intervened.empty() && intervened.size() != samples.size())
        throw std::invalid_argument("one intervention list per row");
    const std::size_t d = samples[0].size();
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0, sumsq = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!intervened.empty()) {
                const auto& iv = intervened[i];
                if (std::find(iv.begin(), iv.end(), static_cast<int>(j)) != iv.end())
                    continue;
            }
            sum += samples[i][j];
            sumsq += samples[i][j] * samples[i][j];
            ++count;
        }
        if (count >= 2)
            total += (sumsq - sum * sum / count) / (count - 1);
    }
    return std::max(total, 0.0);
}

}  // namespace cfscm
