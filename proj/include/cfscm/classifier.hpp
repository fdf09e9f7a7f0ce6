#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cfscm/scm.hpp"

namespace cfscm {

enum class ClassifierKind { LinearLogistic, NonlinearLogistic, RandomForest };

struct TreeNode {
    int feature = -1;    // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double positive_frac = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
};

struct Classifier {
    ClassifierKind kind = ClassifierKind::LinearLogistic;
    // logistic heads: weights over standardized (possibly degree-2) features,
    // bias at index 0
    Eigen::VectorXd weights;
    Eigen::VectorXd feat_mean, feat_sd;
    std::vector<Tree> trees;
    // columns of the input row the classifier reads; empty = all
    std::vector<int> feature_idx;
    int input_dim = 0;
};

// Linear logistic: gradient descent on the log-loss. Nonlinear logistic: the
// same on degree-2 polynomial features. Random forest: bootstrapped trees
// with Gini splits. Logistic kinds require both classes present.
Classifier train_classifier(const Dataset& x, const std::vector<int>& labels,
                            ClassifierKind kind, std::uint64_t seed);

double classify_prob(const Classifier& h, const Row& x);

}  // namespace cfscm
