#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/parallel.hpp"

namespace ramanml {

enum class KnnMetric { Euclidean, Manhattan, Minkowski };
enum class KnnWeights { Uniform, Distance };

struct KnnConfig {
    int n_neighbors = 5;
    KnnMetric metric = KnnMetric::Euclidean;
    double minkowski_p = 3.0;
    KnnWeights weights = KnnWeights::Uniform;

    void validate() const {
        if (n_neighbors < 1) throw ConfigError("knn: n_neighbors must be >= 1");
        if (metric == KnnMetric::Minkowski && minkowski_p < 1.0)
            throw ConfigError("knn: minkowski p must be >= 1");
    }
};

inline std::string to_string(KnnMetric m) {
    switch (m) {
        case KnnMetric::Euclidean: return "euclidean";
        case KnnMetric::Manhattan: return "manhattan";
        case KnnMetric::Minkowski: return "minkowski";
    }
    return "euclidean";
}

inline double knn_distance(std::span<const double> a, std::span<const double> b, KnnMetric metric,
                           double p) {
    if (a.size() != b.size()) throw DimensionMismatchError("knn: feature length mismatch");
    double acc = 0.0;
    switch (metric) {
        case KnnMetric::Euclidean:
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a[i] - b[i];
                acc += d * d;
            }
            return std::sqrt(acc);
        case KnnMetric::Manhattan:
            for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
            return acc;
        case KnnMetric::Minkowski:
            for (std::size_t i = 0; i < a.size(); ++i) acc += std::pow(std::abs(a[i] - b[i]), p);
            return std::pow(acc, 1.0 / p);
    }
    return acc;
}

struct KnnModel {
    KnnConfig config;
    Matrix train_features;
    std::vector<int> train_labels;
    int n_classes = 0;
};

inline KnnModel knn_fit(const Matrix& features, const std::vector<int>& labels, const KnnConfig& config) {
    config.validate();
    if (features.rows() != labels.size()) throw DimensionMismatchError("knn_fit: label count mismatch");
    if (static_cast<std::size_t>(config.n_neighbors) > features.rows())
        throw ConfigError("knn_fit: n_neighbors (" + std::to_string(config.n_neighbors) +
                          ") exceeds training sample count (" + std::to_string(features.rows()) + ")");
    KnnModel m;
    m.config = config;
    m.train_features = features;
    m.train_labels = labels;
    m.n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    return m;
}

inline int knn_predict_one(const KnnModel& m, std::span<const double> query) {
    const std::size_t n = m.train_features.rows();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i)
        dist[i] = {knn_distance(m.train_features.row(i), query, m.config.metric, m.config.minkowski_p), i};

    const auto k = static_cast<std::size_t>(m.config.n_neighbors);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    // exact match short-circuits distance weighting
    if (m.config.weights == KnnWeights::Distance && dist[0].first == 0.0)
        return m.train_labels[dist[0].second];

    std::vector<double> votes(static_cast<std::size_t>(m.n_classes), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const auto cls = static_cast<std::size_t>(m.train_labels[dist[i].second]);
        votes[cls] += m.config.weights == KnnWeights::Uniform ? 1.0 : 1.0 / dist[i].first;
    }
    // ties go to the lowest class index
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = c;
    return static_cast<int>(best);
}

inline std::vector<int> knn_predict(const KnnModel& m, const Matrix& queries, unsigned threads = 1) {
    if (queries.cols() != m.train_features.cols())
        throw DimensionMismatchError("knn_predict: feature count mismatch");
    std::vector<int> out(queries.rows());
    parallel_for(queries.rows(), threads,
                 [&](std::size_t r) { out[r] = knn_predict_one(m, queries.row(r)); });
    return out;
}

}  // namespace ramanml
