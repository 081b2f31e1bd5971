#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ramanml/models/forest.hpp"
#include "ramanml/models/knn.hpp"
#include "ramanml/models/model.hpp"
#include "ramanml/models/svc.hpp"
#include "ramanml/rng.hpp"

using namespace ramanml;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

// exhaustive-search oracle: rank all training rows by distance, vote
int knn_oracle(const Matrix& train, const std::vector<int>& labels, std::span<const double> q,
               const KnnConfig& cfg, int n_classes) {
    std::vector<std::pair<double, std::size_t>> d(train.rows());
    for (std::size_t i = 0; i < train.rows(); ++i)
        d[i] = {knn_distance(train.row(i), q, cfg.metric, cfg.minkowski_p), i};
    std::sort(d.begin(), d.end());
    if (cfg.weights == KnnWeights::Distance && d[0].first == 0.0) return labels[d[0].second];
    std::vector<double> votes(static_cast<std::size_t>(n_classes), 0.0);
    for (int i = 0; i < cfg.n_neighbors; ++i) {
        const double wt = cfg.weights == KnnWeights::Uniform ? 1.0 : 1.0 / d[static_cast<std::size_t>(i)].first;
        votes[static_cast<std::size_t>(labels[d[static_cast<std::size_t>(i)].second])] += wt;
    }
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

// projected gradient ascent on the SVC dual: alpha += eta * grad, then
// project onto { sum alpha_i y_i = 0, 0 <= alpha <= C } via bisection on the
// equality multiplier
double svc_dual_oracle(const Matrix& x, const std::vector<int>& y, double c, SvcKernel kernel,
                       double gamma, int degree) {
    const std::size_t n = x.rows();
    const detail::KernelFn kfn{kernel, degree, gamma};
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k(i, j) = kfn(x.row(i), x.row(j));

    std::vector<double> alpha(n, 0.0);
    const auto project = [&](std::vector<double>& a) {
        const auto balance = [&](double lambda) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += y[i] * std::clamp(a[i] - lambda * y[i], 0.0, c);
            return s;
        };
        double lo = -1e6, hi = 1e6;
        for (int it = 0; it < 200; ++it) {
            const double mid = (lo + hi) / 2.0;
            (balance(mid) > 0.0 ? lo : hi) = mid;
        }
        const double lambda = (lo + hi) / 2.0;
        for (std::size_t i = 0; i < n; ++i) a[i] = std::clamp(a[i] - lambda * y[i], 0.0, c);
    };

    const double eta = 1e-3;
    for (int it = 0; it < 200000; ++it) {
        std::vector<double> grad(n, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                grad[i] -= y[i] * y[j] * alpha[j] * k(i, j);
        for (std::size_t i = 0; i < n; ++i) alpha[i] += eta * grad[i];
        project(alpha);
    }

    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += alpha[i];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * k(i, j);
    return obj;
}

}  // namespace

// ---------------------------------------------------------------------------
// k-nearest neighbors

TEST_CASE("knn: query equal to a training row with k=1 returns that label") {
    Rng rng(1);
    const auto train = random_matrix(12, 4, rng);
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) labels.push_back(i % 3);
    KnnConfig cfg;
    cfg.n_neighbors = 1;
    const auto model = knn_fit(train, labels, cfg);
    for (std::size_t r = 0; r < train.rows(); ++r)
        CHECK(knn_predict_one(model, train.row(r)) == labels[r]);
}

TEST_CASE("knn: exact match short-circuits distance weighting") {
    Matrix train = Matrix::from_rows({{0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}});
    std::vector<int> labels{2, 2, 0};
    KnnConfig cfg;
    cfg.n_neighbors = 3;
    cfg.weights = KnnWeights::Distance;
    const auto model = knn_fit(train, labels, cfg);
    const std::vector<double> q{0.0, 0.0};
    CHECK(knn_predict_one(model, q) == 2);
}

TEST_CASE("knn: matches the exhaustive oracle for all metrics") {
    Rng rng(42);
    const int n_classes = 4;
    const auto train = random_matrix(30, 5, rng);
    std::vector<int> labels(30);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(n_classes));

    for (const auto metric : {KnnMetric::Euclidean, KnnMetric::Manhattan, KnnMetric::Minkowski}) {
        for (const auto weights : {KnnWeights::Uniform, KnnWeights::Distance}) {
            KnnConfig cfg;
            cfg.metric = metric;
            cfg.weights = weights;
            cfg.n_neighbors = 5;
            cfg.minkowski_p = 3.0;
            const auto model = knn_fit(train, labels, cfg);
            const auto queries = random_matrix(25, 5, rng);
            const auto got = knn_predict(model, queries);
            for (std::size_t q = 0; q < queries.rows(); ++q)
                CHECK(got[q] == knn_oracle(train, labels, queries.row(q), cfg, n_classes));
        }
    }
}

TEST_CASE("knn: invariant under permutation of training rows") {
    Rng rng(5);
    const auto train = random_matrix(20, 3, rng);
    std::vector<int> labels(20);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(3));
    KnnConfig cfg;
    cfg.n_neighbors = 4;
    const auto base = knn_fit(train, labels, cfg);

    std::vector<std::size_t> perm(20);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix shuffled(20, 3);
    std::vector<int> shuffled_labels(20);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.set_row(i, train.row(perm[i]));
        shuffled_labels[i] = labels[perm[i]];
    }
    const auto permuted = knn_fit(shuffled, shuffled_labels, cfg);

    const auto queries = random_matrix(15, 3, rng);
    CHECK(knn_predict(base, queries) == knn_predict(permuted, queries));
}

TEST_CASE("knn: k larger than the training set is a ConfigError") {
    Matrix train = Matrix::from_rows({{0.0}, {1.0}});
    KnnConfig cfg;
    cfg.n_neighbors = 3;
    CHECK_THROWS_AS(knn_fit(train, {0, 1}, cfg), ConfigError);
}

TEST_CASE("knn: feature count mismatch raises DimensionMismatch") {
    Matrix train = Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
    KnnConfig cfg;
    cfg.n_neighbors = 1;
    const auto model = knn_fit(train, {0, 1}, cfg);
    Matrix bad = Matrix::from_rows({{0.0, 1.0, 2.0}});
    CHECK_THROWS_AS(knn_predict(model, bad), DimensionMismatchError);
}

// ---------------------------------------------------------------------------
// random forest

TEST_CASE("forest: single informative feature gets nearly all importance") {
    Rng rng(9);
    Matrix x(40, 6);
    std::vector<int> labels(40);
    for (std::size_t r = 0; r < 40; ++r) {
        labels[r] = r < 20 ? 0 : 1;
        x(r, 2) = labels[r] == 0 ? rng.uniform(0.0, 1.0) : rng.uniform(2.0, 3.0);
        for (std::size_t c = 0; c < 6; ++c)
            if (c != 2) x(r, c) = rng.uniform(0.0, 1.0);
    }
    ForestConfig cfg;
    cfg.n_estimators = 50;
    cfg.max_features = 6;  // always allowed to see the informative feature
    cfg.seed = 3;
    const auto model = forest_fit(x, labels, cfg);
    CHECK(accuracy(forest_predict(model, x), labels) == 1.0);
    CHECK(model.importances[2] >= 0.99);
}

TEST_CASE("forest: importances sum to one") {
    Rng rng(13);
    const auto x = random_matrix(30, 8, rng);
    std::vector<int> labels(30);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(3));
    ForestConfig cfg;
    cfg.n_estimators = 25;
    cfg.max_features = 3;
    cfg.seed = 1;
    const auto model = forest_fit(x, labels, cfg);
    double total = 0.0;
    for (double v : model.importances) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    for (double v : model.importances) CHECK(v >= 0.0);
}

TEST_CASE("forest: chlorpyrifos-shaped config validates against the feature count") {
    ForestConfig cfg;
    cfg.n_estimators = 200;
    cfg.max_features = 148;
    cfg.criterion = SplitCriterion::Entropy;
    CHECK_NOTHROW(cfg.validate(512));
    CHECK_THROWS_AS(cfg.validate(100), ConfigError);  // 148 > feature count
    CHECK(cfg.resolved_max_features(512) == 148);
}

TEST_CASE("forest: fixed seed gives identical trees for any thread count") {
    Rng rng(17);
    const auto x = random_matrix(60, 10, rng);
    std::vector<int> labels(60);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(4));
    ForestConfig cfg;
    cfg.n_estimators = 16;
    cfg.max_features = 3;
    cfg.seed = 77;
    const auto a = forest_fit(x, labels, cfg, 1);
    const auto b = forest_fit(x, labels, cfg, 8);
    REQUIRE(a.trees.size() == b.trees.size());
    CHECK(a.importances == b.importances);
    const auto queries = random_matrix(30, 10, rng);
    CHECK(forest_predict(a, queries) == forest_predict(b, queries));
    CHECK(model_to_json({a}).dump() == model_to_json({b}).dump());
}

TEST_CASE("forest: single-class training yields a degenerate constant model") {
    Rng rng(19);
    const auto x = random_matrix(10, 3, rng);
    ForestConfig cfg;
    cfg.n_estimators = 5;
    cfg.max_features = 2;
    const auto model = forest_fit(x, std::vector<int>(10, 0), cfg);
    CHECK(model.degenerate);
    const auto pred = forest_predict(model, x);
    for (int p : pred) CHECK(p == 0);
}

TEST_CASE("forest: entropy and gini criteria both separate clean data") {
    Rng rng(23);
    Matrix x(30, 4);
    std::vector<int> labels(30);
    for (std::size_t r = 0; r < 30; ++r) {
        labels[r] = static_cast<int>(r / 10);
        for (std::size_t c = 0; c < 4; ++c) x(r, c) = rng.uniform(0.0, 0.5) + labels[r] * (c == 1 ? 2.0 : 0.0);
    }
    for (const auto crit : {SplitCriterion::Gini, SplitCriterion::Entropy}) {
        ForestConfig cfg;
        cfg.n_estimators = 20;
        cfg.max_features = 2;
        cfg.criterion = crit;
        cfg.seed = 5;
        const auto model = forest_fit(x, labels, cfg);
        CHECK(accuracy(forest_predict(model, x), labels) >= 0.97);
    }
}

// ---------------------------------------------------------------------------
// support vector classifier

TEST_CASE("svc: two separable points, linear kernel, boundary at the midpoint") {
    Matrix x = Matrix::from_rows({{0.0}, {1.0}});
    std::vector<int> labels{0, 1};
    SvcConfig cfg;
    cfg.c = 100.0;
    cfg.kernel = SvcKernel::Linear;
    const auto model = svc_fit(x, labels, cfg);

    CHECK(svc_predict(model, Matrix::from_rows({{0.0}}))[0] == 0);
    CHECK(svc_predict(model, Matrix::from_rows({{1.0}}))[0] == 1);
    // decision value changes sign at 0.5 within tolerance
    const auto& machine = model.machines.front();
    const double left = svc_decision(model, machine, std::vector<double>{0.5 - 2.0 * cfg.tolerance});
    const double right = svc_decision(model, machine, std::vector<double>{0.5 + 2.0 * cfg.tolerance});
    CHECK(left > 0.0);   // class 0 is the positive side of the (0,1) machine
    CHECK(right < 0.0);
}

TEST_CASE("svc: dual objective within 1e-3 of the projected-gradient oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t n = 12;
        Matrix x(n, 2);
        std::vector<int> labels(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = i < n / 2 ? 0 : 1;
            y[i] = labels[i] == 0 ? 1 : -1;
            x(i, 0) = rng.uniform(0.0, 1.0) + (labels[i] == 0 ? 0.0 : 1.2);
            x(i, 1) = rng.uniform(0.0, 1.0);
        }
        SvcConfig cfg;
        cfg.c = 1.0;
        cfg.kernel = SvcKernel::Linear;
        cfg.tolerance = 1e-5;
        cfg.max_passes = 20000;
        const auto model = svc_fit(x, labels, cfg);
        const double smo_obj = model.machines.front().dual_objective;
        const double oracle_obj = svc_dual_oracle(x, y, cfg.c, cfg.kernel, model.gamma, cfg.degree);
        CHECK(std::abs(smo_obj - oracle_obj) < 1e-3);
    }
}

TEST_CASE("svc: rbf kernel separates a ring from its center") {
    Rng rng(37);
    const std::size_t n = 40;
    Matrix x(n, 2);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool inner = i < n / 2;
        const double r = inner ? rng.uniform(0.0, 0.5) : rng.uniform(1.5, 2.0);
        const double th = rng.uniform(0.0, 6.28318);
        x(i, 0) = r * std::cos(th);
        x(i, 1) = r * std::sin(th);
        labels[i] = inner ? 0 : 1;
    }
    SvcConfig cfg;
    cfg.c = 10.0;
    cfg.kernel = SvcKernel::Rbf;
    const auto model = svc_fit(x, labels, cfg);
    CHECK(accuracy(svc_predict(model, x), labels) >= 0.95);
}

TEST_CASE("svc: one-vs-one handles three classes") {
    Rng rng(41);
    const std::size_t per = 10;
    Matrix x(3 * per, 2);
    std::vector<int> labels(3 * per);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < per; ++i) {
            x(c * per + i, 0) = rng.uniform(0.0, 0.6) + 2.0 * static_cast<double>(c);
            x(c * per + i, 1) = rng.uniform(0.0, 0.6);
            labels[c * per + i] = static_cast<int>(c);
        }
    SvcConfig cfg;
    cfg.c = 100.0;
    cfg.kernel = SvcKernel::Linear;
    const auto model = svc_fit(x, labels, cfg);
    CHECK(model.machines.size() == 3);
    CHECK(accuracy(svc_predict(model, x), labels) == 1.0);
}

TEST_CASE("svc: duplicating a non-support vector leaves the decision function unchanged") {
    Rng rng(43);
    const std::size_t n = 14;
    Matrix x(n, 2);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = i < n / 2 ? 0 : 1;
        x(i, 0) = rng.uniform(0.0, 0.8) + (labels[i] == 0 ? 0.0 : 3.0);
        x(i, 1) = rng.uniform(0.0, 0.8);
    }
    SvcConfig cfg;
    cfg.c = 1.0;
    cfg.kernel = SvcKernel::Linear;
    cfg.tolerance = 1e-4;
    cfg.max_passes = 20000;
    const auto base = svc_fit(x, labels, cfg);

    // pick a training row far from the margin (not referenced as a support vector)
    std::size_t non_sv = n;
    for (std::size_t i = 0; i < n && non_sv == n; ++i) {
        bool used = false;
        for (std::size_t s = 0; s < base.machines.front().support_rows.size(); ++s) {
            const auto sv_row = base.machines.front().support_rows[s];
            bool same = true;
            for (std::size_t c = 0; c < 2; ++c)
                same &= base.support_vectors(sv_row, c) == x(i, c);
            used |= same;
        }
        if (!used) non_sv = i;
    }
    REQUIRE(non_sv < n);

    Matrix x2(n + 1, 2);
    std::vector<int> labels2(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        x2.set_row(i, x.row(i));
        labels2[i] = labels[i];
    }
    x2.set_row(n, x.row(non_sv));
    labels2[n] = labels[non_sv];
    const auto dup = svc_fit(x2, labels2, cfg);

    Rng qrng(47);
    const auto queries = random_matrix(20, 2, qrng, -1.0, 4.0);
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        const double fa = svc_decision(base, base.machines.front(), queries.row(q));
        const double fb = svc_decision(dup, dup.machines.front(), queries.row(q));
        CHECK(std::abs(fa - fb) < 10.0 * cfg.tolerance);
    }
}

TEST_CASE("svc: single class is degenerate; zero C is a ConfigError") {
    Matrix x = Matrix::from_rows({{0.0}, {1.0}});
    CHECK_THROWS_AS(svc_fit(x, {0, 0}, SvcConfig{}), DegenerateDataError);
    SvcConfig bad;
    bad.c = 0.0;
    CHECK_THROWS_AS(svc_fit(x, {0, 1}, bad), ConfigError);
}

// ---------------------------------------------------------------------------
// serialization

TEST_CASE("model save/load round-trips preserve predictions") {
    Rng rng(53);
    const auto x = random_matrix(24, 5, rng);
    std::vector<int> labels(24);
    for (std::size_t i = 0; i < 24; ++i) labels[i] = static_cast<int>(i % 3);
    const auto queries = random_matrix(10, 5, rng);

    const auto dir = std::filesystem::temp_directory_path() / "ramanml_test_models";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    KnnConfig knn_cfg;
    knn_cfg.n_neighbors = 3;
    ForestConfig rf_cfg;
    rf_cfg.n_estimators = 10;
    rf_cfg.max_features = 2;
    SvcConfig svc_cfg;
    svc_cfg.c = 10.0;

    const std::vector<TrainedModel> models{
        TrainedModel{knn_fit(x, labels, knn_cfg)},
        TrainedModel{forest_fit(x, labels, rf_cfg)},
        TrainedModel{svc_fit(x, labels, svc_cfg)},
    };
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto path = (dir / ("m" + std::to_string(i) + ".json")).string();
        save_model(models[i], path);
        const auto back = load_model(path);
        CHECK(back.kind() == models[i].kind());
        CHECK(back.predict(queries) == models[i].predict(queries));
        CHECK(model_to_json(back).dump() == model_to_json(models[i]).dump());
    }

    CHECK(models[1].importances().has_value());
    CHECK_FALSE(models[0].importances().has_value());
}
