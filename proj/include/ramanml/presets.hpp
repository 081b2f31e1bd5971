#pragma once

#include <string>

#include "ramanml/errors.hpp"
#include "ramanml/eval.hpp"

namespace ramanml {

// Tuned hyperparameter presets for the five reference datasets: full R6G,
// its evaporating-Ouzo and silver-nanoparticle subsets, triclosan, and
// chlorpyrifos.
inline ModelSpec tuned_preset(ModelKind kind, const std::string& name) {
    const auto unknown = [&]() -> ModelSpec {
        throw ConfigError("unknown preset '" + name + "' (expected r6g, r6g-ouzo, r6g-agnano, triclosan, chlorpyrifos)");
    };
    switch (kind) {
        case ModelKind::Forest: {
            ForestConfig c;
            if (name == "r6g") {
                c.n_estimators = 139;
                c.max_features = 43;
                c.criterion = SplitCriterion::Entropy;
            } else if (name == "r6g-ouzo") {
                c.n_estimators = 53;
                c.max_features = 12;
                c.criterion = SplitCriterion::Gini;
            } else if (name == "r6g-agnano") {
                c.n_estimators = 166;
                c.max_features = 24;
                c.criterion = SplitCriterion::Entropy;
            } else if (name == "triclosan") {
                c.n_estimators = 63;
                c.max_features = 10;
                c.criterion = SplitCriterion::Entropy;
            } else if (name == "chlorpyrifos") {
                c.n_estimators = 200;
                c.max_features = 148;
                c.criterion = SplitCriterion::Entropy;
            } else {
                return unknown();
            }
            return c;
        }
        case ModelKind::Knn: {
            KnnConfig c;
            if (name == "r6g") {
                c.metric = KnnMetric::Euclidean;
                c.n_neighbors = 2;
                c.weights = KnnWeights::Distance;
            } else if (name == "r6g-ouzo") {
                c.metric = KnnMetric::Manhattan;
                c.n_neighbors = 3;
                c.weights = KnnWeights::Uniform;
            } else if (name == "r6g-agnano") {
                c.metric = KnnMetric::Manhattan;
                c.n_neighbors = 4;
                c.weights = KnnWeights::Distance;
            } else if (name == "triclosan") {
                c.metric = KnnMetric::Minkowski;  // exponent not published; p = 3 default
                c.n_neighbors = 2;
                c.weights = KnnWeights::Uniform;
            } else if (name == "chlorpyrifos") {
                c.metric = KnnMetric::Manhattan;
                c.n_neighbors = 2;
                c.weights = KnnWeights::Distance;
            } else {
                return unknown();
            }
            return c;
        }
        case ModelKind::Svc: {
            SvcConfig c;
            if (name == "r6g") {
                c.c = 100.0;
                c.degree = 6;
                c.kernel = SvcKernel::Linear;
            } else if (name == "r6g-ouzo") {
                c.c = 100.0;
                c.degree = 6;
                c.kernel = SvcKernel::Linear;
            } else if (name == "r6g-agnano") {
                c.c = 35.748;
                c.degree = 2;
                c.kernel = SvcKernel::Rbf;
            } else if (name == "triclosan") {
                c.c = 100.0;
                c.degree = 2;
                c.kernel = SvcKernel::Rbf;
            } else if (name == "chlorpyrifos") {
                c.c = 100.0;
                c.degree = 6;
                c.kernel = SvcKernel::Linear;
            } else {
                return unknown();
            }
            return c;
        }
        case ModelKind::Cnn: {
            // the network architecture is fixed; presets only pick defaults
            CnnConfig c;
            if (name != "r6g" && name != "r6g-ouzo" && name != "r6g-agnano" && name != "triclosan" &&
                name != "chlorpyrifos")
                return unknown();
            return c;
        }
    }
    return unknown();
}

}  // namespace ramanml
