#include "cfscm/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace cfscm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd gather_features(const Classifier& h, const Row& x) {
    if (h.feature_idx.empty()) {
        VectorXd v(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) v[i] = x[i];
        return v;
    }
    VectorXd v(h.feature_idx.size());
    for (std::size_t i = 0; i < h.feature_idx.size(); ++i)
        v[i] = x[h.feature_idx[i]];
    return v;
}

VectorXd poly_features(const VectorXd& v) {
    const int d = static_cast<int>(v.size());
    VectorXd out(d + d * (d + 1) / 2);
    out.head(d) = v;
    int k = d;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) out[k++] = v[i] * v[j];
    return out;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void fit_logistic(Classifier& h, const MatrixXd& feats,
                  const std::vector<int>& labels) {
    const int n = static_cast<int>(feats.rows());
    const int d = static_cast<int>(feats.cols());
    h.feat_mean = feats.colwise().mean();
    h.feat_sd.resize(d);
    for (int j = 0; j < d; ++j) {
        double var = (feats.col(j).array() - h.feat_mean[j]).square().mean();
        h.feat_sd[j] = std::max(std::sqrt(var), 1e-12);
    }
    MatrixXd Z(n, d + 1);
    Z.col(0).setOnes();
    for (int j = 0; j < d; ++j)
        Z.col(j + 1) = (feats.col(j).array() - h.feat_mean[j]) / h.feat_sd[j];
    VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = labels[i];

    VectorXd w = VectorXd::Zero(d + 1);
    const double lr = 0.5;
    for (int step = 0; step < 2000; ++step) {
        VectorXd p = (Z * w).unaryExpr([](double t) { return sigmoid(t); });
        VectorXd grad = Z.transpose() * (p - y) / n;
        w -= lr * grad;
    }
    h.weights = w;
}

struct ForestBuilder {
    const MatrixXd& x;
    const std::vector<int>& y;
    int max_depth;
    int mtry;
    Rng& rng;
    Tree tree;

    int build(const std::vector<int>& idx, int depth) {
        TreeNode node;
        int pos = 0;
        for (int i : idx) pos += y[i];
        node.positive_frac = static_cast<double>(pos) / idx.size();
        int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);
        if (depth >= max_depth || idx.size() < 4 || pos == 0 ||
            pos == static_cast<int>(idx.size()))
            return id;

        // best Gini split over a random feature subset
        double best_gain = 1e-12;
        int best_feat = -1;
        double best_thresh = 0.0;
        double parent_gini =
            2.0 * node.positive_frac * (1.0 - node.positive_frac);
        std::vector<int> feats(x.cols());
        for (int j = 0; j < x.cols(); ++j) feats[j] = j;
        for (int j = 0; j < std::min<int>(mtry, x.cols()); ++j)
            std::swap(feats[j], feats[j + rng.index(feats.size() - j)]);

        std::vector<std::pair<double, int>> vals;
        for (int t = 0; t < std::min<int>(mtry, x.cols()); ++t) {
            int f = feats[t];
            vals.clear();
            for (int i : idx) vals.emplace_back(x(i, f), y[i]);
            std::sort(vals.begin(), vals.end());
            int left_pos = 0;
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                left_pos += vals[k].second;
                if (vals[k].first == vals[k + 1].first) continue;
                double nl = k + 1.0, nr = vals.size() - nl;
                double pl = left_pos / nl, pr = (pos - left_pos) / nr;
                double gini = (nl * 2.0 * pl * (1.0 - pl) +
                               nr * 2.0 * pr * (1.0 - pr)) /
                              vals.size();
                double gain = parent_gini - gini;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feat = f;
                    best_thresh = 0.5 * (vals[k].first + vals[k + 1].first);
                }
            }
        }
        if (best_feat < 0) return id;

        std::vector<int> left, right;
        for (int i : idx)
            (x(i, best_feat) <= best_thresh ? left : right).push_back(i);
        if (left.empty() || right.empty()) return id;
        tree.nodes[id].feature = best_feat;
        tree.nodes[id].threshold = best_thresh;
        int l = build(left, depth + 1);
        tree.nodes[id].left = l;
        int r = build(right, depth + 1);
        tree.nodes[id].right = r;
        return id;
    }
};

double tree_prob(const Tree& tree, const VectorXd& v) {
    int id = 0;
    while (tree.nodes[id].feature >= 0) {
        const TreeNode& n = tree.nodes[id];
        id = v[n.feature] <= n.threshold ? n.left : n.right;
    }
    return tree.nodes[id].positive_frac;
}

}  // namespace

Classifier train_classifier(const Dataset& x, const std::vector<int>& labels,
                            ClassifierKind kind, std::uint64_t seed) {
    if (x.empty() || x.size() != labels.size())
        throw std::invalid_argument("one label per row");
    int pos = 0;
    for (int l : labels) pos += l;
    const int n = static_cast<int>(x.size());
    const int d = static_cast<int>(x[0].size());

    Classifier h;
    h.kind = kind;
    h.input_dim = d;

    if (kind != ClassifierKind::RandomForest && (pos == 0 || pos == n))
        throw std::invalid_argument("logistic training needs both classes");

    MatrixXd raw(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) raw(i, j) = x[i][j];

    if (kind == ClassifierKind::LinearLogistic) {
        fit_logistic(h, raw, labels);
    } else if (kind == ClassifierKind::NonlinearLogistic) {
        MatrixXd feats(n, d + d * (d + 1) / 2);
        for (int i = 0; i < n; ++i)
            feats.row(i) = poly_features(raw.row(i).transpose()).transpose();
        fit_logistic(h, feats, labels);
    } else {
        const int n_trees = 50;
        const int mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(d))));
        Rng rng(seed);
        for (int t = 0; t < n_trees; ++t) {
            Rng tree_rng = rng.child(t);
            std::vector<int> idx(n);
            for (int i = 0; i < n; ++i)
                idx[i] = static_cast<int>(tree_rng.index(n));
            ForestBuilder b{raw, labels, 6, mtry, tree_rng, {}};
            b.build(idx, 0);
            h.trees.push_back(std::move(b.tree));
        }
    }
    return h;
}

double classify_prob(const Classifier& h, const Row& x) {
    VectorXd v = gather_features(h, x);
    if (static_cast<int>(v.size()) != h.input_dim)
        throw std::invalid_argument("feature dimension mismatch");
    if (h.kind == ClassifierKind::RandomForest) {
        double acc = 0.0;
        for (const auto& t : h.trees) acc += tree_prob(t, v);
        return acc / h.trees.size();
    }
    VectorXd f = h.kind == ClassifierKind::NonlinearLogistic ? poly_features(v) : v;
    double t = h.weights[0];
    for (int j = 0; j < f.size(); ++j)
        t += h.weights[j + 1] * (f[j] - h.feat_mean[j]) / h.feat_sd[j];
    return sigmoid(t);
}

}  // namespace cfscm
