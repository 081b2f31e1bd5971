#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ramanml/augment.hpp"
#include "ramanml/dataset.hpp"
#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/models/model.hpp"
#include "ramanml/rng.hpp"
#include "ramanml/text.hpp"
#include "ramanml/transform.hpp"

namespace ramanml {

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t s = base ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    return splitmix64(s);
}

// ---------------------------------------------------------------------------
// Stratified k-fold

// Per-class round-robin after a seeded within-class shuffle. Fold sizes per
// class differ by at most one; the starting fold rotates with the class so
// no fold systematically collects the remainders.
inline std::vector<int> stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw FoldError("stratified_kfold: k must be >= 2");
    if (labels.empty()) throw FoldError("stratified_kfold: no samples");
    const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;

    std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        per_class[static_cast<std::size_t>(labels[i])].push_back(i);

    std::size_t min_count = labels.size();
    for (const auto& rows : per_class) min_count = std::min(min_count, rows.size());
    if (min_count < static_cast<std::size_t>(k))
        throw FoldError("stratified_kfold: smallest class has " + std::to_string(min_count) +
                        " samples, fewer than k=" + std::to_string(k) + "; use k <= " +
                        std::to_string(min_count));

    std::vector<int> fold(labels.size(), 0);
    for (std::size_t cls = 0; cls < per_class.size(); ++cls) {
        auto rows = per_class[cls];
        Rng rng(seed, cls);
        rng.shuffle(rows);
        const int start = static_cast<int>(cls) % k;
        for (std::size_t i = 0; i < rows.size(); ++i)
            fold[rows[i]] = (start + static_cast<int>(i)) % k;
    }
    return fold;
}

// ---------------------------------------------------------------------------
// Regression error (squared categorical distance, summed over predictions)

inline double regression_error(const std::vector<int>& predicted, const std::vector<int>& truth,
                               int n_classes) {
    if (predicted.size() != truth.size())
        throw LengthMismatchError("regression_error: prediction/truth length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] < 0 || predicted[i] >= n_classes || truth[i] < 0 || truth[i] >= n_classes)
            throw DomainError("regression_error: class index out of range");
        const double d = static_cast<double>(predicted[i] - truth[i]);
        sum += d * d;
    }
    return sum / (static_cast<double>(n_classes) * static_cast<double>(n_classes));
}

// ---------------------------------------------------------------------------
// Model specification

using ModelSpec = std::variant<KnnConfig, ForestConfig, SvcConfig, CnnConfig>;

inline ModelKind kind_of(const ModelSpec& spec) { return static_cast<ModelKind>(spec.index()); }

inline ModelSpec with_seed(ModelSpec spec, std::uint64_t seed) {
    if (auto* rf = std::get_if<ForestConfig>(&spec)) rf->seed = seed;
    if (auto* svc = std::get_if<SvcConfig>(&spec)) svc->seed = seed;
    if (auto* cnn = std::get_if<CnnConfig>(&spec)) cnn->seed = seed;
    return spec;
}

inline nlohmann::json model_spec_to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["kind"] = to_string(kind_of(spec));
    if (const auto* knn = std::get_if<KnnConfig>(&spec)) {
        j["n_neighbors"] = knn->n_neighbors;
        j["metric"] = to_string(knn->metric);
        j["minkowski_p"] = knn->minkowski_p;
        j["weights"] = knn->weights == KnnWeights::Uniform ? "uniform" : "distance";
    } else if (const auto* rf = std::get_if<ForestConfig>(&spec)) {
        j["n_estimators"] = rf->n_estimators;
        j["max_features"] = rf->max_features;
        j["criterion"] = to_string(rf->criterion);
    } else if (const auto* svc = std::get_if<SvcConfig>(&spec)) {
        j["c"] = svc->c;
        j["kernel"] = to_string(svc->kernel);
        j["degree"] = svc->degree;
        j["rbf_gamma"] = svc->rbf_gamma;
        j["tolerance"] = svc->tolerance;
        j["max_passes"] = svc->max_passes;
    } else if (const auto* cnn = std::get_if<CnnConfig>(&spec)) {
        j["conv_filters"] = cnn->conv_filters;
        j["kernel_width"] = cnn->kernel_width;
        j["dropout_rate"] = cnn->dropout_rate;
        j["hidden_units"] = cnn->hidden_units;
        j["learning_rate"] = cnn->learning_rate;
        j["batch_size"] = cnn->batch_size;
        j["epochs"] = cnn->epochs;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct PipelineSpec {
    TransformKind kind = TransformKind::Scaled;
    TransformOptions transform{};
    bool scale_features = true;                      // fold-local z-scoring
    std::optional<AugmentationConfig> augmentation;  // applied inside training folds only
    double inner_val_fraction = 0.1;                 // CNN monitoring split of the train fold
};

struct CvReport {
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample (n-1) standard deviation
    Matrix confusion;           // rows = true class, pooled over validation folds
    double regression_error_sum = 0.0;   // literal form (sum over predictions)
    double regression_error_mean = 0.0;  // convenience per-prediction mean
    std::vector<int> fold_assignment;
    std::vector<double> fold_fit_seconds;          // volatile; never written to report files
    std::vector<std::string> fold_model_digest;    // stable digest of fitted model + scaler
    TrainHistory last_history;                     // CNN only, final fold

    double total_fit_seconds() const {
        double s = 0.0;
        for (double v : fold_fit_seconds) s += v;
        return s;
    }
};

namespace detail {

[[noreturn]] inline void rethrow_in_fold(const Error& e, int fold) {
    const std::string msg = "fold " + std::to_string(fold) + ": " + e.what();
    if (dynamic_cast<const DegenerateSpectrumError*>(&e)) throw DegenerateSpectrumError(msg);
    if (dynamic_cast<const SvcNonConvergence*>(&e)) throw NonConvergenceError(msg);
    if (dynamic_cast<const NonConvergenceError*>(&e)) throw NonConvergenceError(msg);
    if (dynamic_cast<const NumericalDivergenceError*>(&e)) throw NumericalDivergenceError(msg);
    if (dynamic_cast<const DegenerateDataError*>(&e)) throw DegenerateDataError(msg);
    if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
    if (dynamic_cast<const EmptyDatasetError*>(&e)) throw EmptyDatasetError(msg);
    throw Error(msg);
}

// stratified take of roughly `fraction` rows, at least one overall
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double fraction, std::uint64_t seed) {
    const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        per_class[static_cast<std::size_t>(labels[i])].push_back(i);

    std::vector<std::size_t> held, rest;
    for (std::size_t cls = 0; cls < per_class.size(); ++cls) {
        auto rows = per_class[cls];
        Rng rng(seed, cls);
        rng.shuffle(rows);
        const auto take = static_cast<std::size_t>(
            std::floor(fraction * static_cast<double>(rows.size()) + 0.5));
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < take ? held : rest).push_back(rows[i]);
    }
    if (held.empty() && !rest.empty()) {
        // take one sample from the class with the most remaining members so
        // no class empties out of the training side
        std::vector<std::size_t> remaining(per_class.size(), 0);
        for (std::size_t i : rest) remaining[static_cast<std::size_t>(labels[i])]++;
        std::size_t biggest = 0;
        for (std::size_t cls = 1; cls < remaining.size(); ++cls)
            if (remaining[cls] > remaining[biggest]) biggest = cls;
        for (std::size_t i = 0; i < rest.size(); ++i) {
            if (static_cast<std::size_t>(labels[rest[i]]) == biggest) {
                held.push_back(rest[i]);
                rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
                break;
            }
        }
    }
    std::sort(held.begin(), held.end());
    std::sort(rest.begin(), rest.end());
    return {held, rest};
}

struct FoldFit {
    TrainedModel model;
    std::optional<ScalerParams> scaler;
    TrainHistory history;  // CNN only
};

inline std::string fold_digest(const FoldFit& fit) {
    nlohmann::json j = model_to_json(fit.model);
    if (fit.scaler) j["scaler"] = {{"means", fit.scaler->means}, {"stds", fit.scaler->stds}};
    return hex12(fnv1a(j.dump()));
}

// Fit one fold of the full pipeline. Everything data-dependent (scaler,
// augmentation statistics, the model itself) sees training rows only.
inline FoldFit fit_fold(const ModelSpec& spec, const LabeledDataset& train_ds,
                        const PipelineSpec& pipeline, std::uint64_t fold_seed, unsigned threads) {
    FoldFit out;

    LabeledDataset inner_train = train_ds;
    LabeledDataset inner_val;
    const bool is_cnn = kind_of(spec) == ModelKind::Cnn;

    if (is_cnn) {
        const auto [val_rows, train_rows] =
            stratified_split(train_ds.labels, pipeline.inner_val_fraction, derive_seed(fold_seed, 11));
        // a holdout that would empty a class is no holdout; monitor on the
        // training rows instead (the CV validation fold stays untouched)
        std::vector<std::size_t> remaining(train_ds.n_classes(), 0);
        for (std::size_t i : train_rows) remaining[static_cast<std::size_t>(train_ds.labels[i])]++;
        const bool feasible = !val_rows.empty() &&
                              std::all_of(remaining.begin(), remaining.end(),
                                          [](std::size_t n) { return n > 0; });
        if (feasible) {
            inner_val = train_ds.take(val_rows);
            inner_train = train_ds.take(train_rows);
        } else {
            inner_val = train_ds;
        }
    }

    if (pipeline.augmentation) {
        AugmentationConfig aug = *pipeline.augmentation;
        aug.seed = derive_seed(fold_seed, 13);
        inner_train = augment_dataset(inner_train, aug);
    }

    FeatureMatrix train_fm = transform_rows(inner_train, pipeline.kind, pipeline.transform);
    if (pipeline.scale_features) {
        out.scaler = fit_scaler(train_fm.values);
        out.scaler->apply(train_fm.values);
    }

    const ModelSpec seeded = with_seed(spec, derive_seed(fold_seed, 17));
    if (const auto* knn = std::get_if<KnnConfig>(&seeded)) {
        out.model.impl = knn_fit(train_fm.values, train_fm.labels, *knn);
    } else if (const auto* rf = std::get_if<ForestConfig>(&seeded)) {
        out.model.impl = forest_fit(train_fm.values, train_fm.labels, *rf, threads);
    } else if (const auto* svc = std::get_if<SvcConfig>(&seeded)) {
        out.model.impl = svc_fit(train_fm.values, train_fm.labels, *svc, threads);
    } else {
        const auto& cnn_cfg = std::get<CnnConfig>(seeded);
        FeatureMatrix val_fm = transform_rows(inner_val, pipeline.kind, pipeline.transform);
        if (out.scaler) out.scaler->apply(val_fm.values);
        CnnNetwork net = make_cnn(cnn_cfg, train_fm.values.cols(),
                                  static_cast<std::size_t>(*std::max_element(train_ds.labels.begin(),
                                                                             train_ds.labels.end())) + 1);
        out.history = cnn_train(net, train_fm.values, train_fm.labels, val_fm.values, val_fm.labels);
        out.model.impl = std::move(net);
    }
    return out;
}

}  // namespace detail

// Full-pipeline stratified k-fold cross-validation over raw spectra.
inline CvReport cross_validate(const ModelSpec& spec, const LabeledDataset& ds,
                               const PipelineSpec& pipeline, int k, std::uint64_t seed,
                               unsigned threads = 1) {
    if (pipeline.augmentation)
        for (const auto& m : ds.meta)
            if (m.augmented)
                throw InvalidPartitionError(
                    "cross_validate: input already contains augmented rows; augmentation must happen "
                    "inside training folds");

    const auto fold_of = stratified_kfold(ds.labels, k, seed);
    const auto n_classes = static_cast<std::size_t>(
        *std::max_element(ds.labels.begin(), ds.labels.end()) + 1);

    CvReport report;
    report.fold_assignment = fold_of;
    report.confusion = Matrix(n_classes, n_classes);

    std::vector<int> pooled_pred(ds.size(), -1);
    for (int fold = 0; fold < k; ++fold) {
        std::vector<std::size_t> train_rows, val_rows;
        for (std::size_t i = 0; i < ds.size(); ++i)
            (fold_of[i] == fold ? val_rows : train_rows).push_back(i);

        const LabeledDataset train_ds = ds.take(train_rows);
        const LabeledDataset val_ds = ds.take(val_rows);

        const auto t0 = std::chrono::steady_clock::now();
        detail::FoldFit fit;
        try {
            fit = detail::fit_fold(spec, train_ds, pipeline, derive_seed(seed, static_cast<std::uint64_t>(fold)),
                                   threads);
        } catch (const Error& e) {
            detail::rethrow_in_fold(e, fold);
        }
        const auto t1 = std::chrono::steady_clock::now();

        FeatureMatrix val_fm = transform_rows(val_ds, pipeline.kind, pipeline.transform);
        if (fit.scaler) fit.scaler->apply(val_fm.values);
        const auto pred = fit.model.predict(val_fm.values, threads);

        std::size_t hits = 0;
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
            pooled_pred[val_rows[i]] = pred[i];
            report.confusion(static_cast<std::size_t>(ds.labels[val_rows[i]]),
                             static_cast<std::size_t>(pred[i])) += 1.0;
            hits += pred[i] == ds.labels[val_rows[i]] ? 1 : 0;
        }
        report.fold_accuracy.push_back(static_cast<double>(hits) / static_cast<double>(val_rows.size()));
        report.fold_fit_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
        report.fold_model_digest.push_back(detail::fold_digest(fit));
        report.last_history = std::move(fit.history);
    }

    report.mean_accuracy = mean(report.fold_accuracy);
    report.std_accuracy = sample_std(report.fold_accuracy);
    report.regression_error_sum =
        regression_error(pooled_pred, ds.labels, static_cast<int>(n_classes));
    report.regression_error_mean =
        ds.size() ? report.regression_error_sum / static_cast<double>(ds.size()) : 0.0;
    return report;
}

// Cross-validation over a precomputed feature matrix (fold-local scaling
// still applies). Augmentation needs raw spectra, so it is not available on
// this path.
inline CvReport cross_validate(const ModelSpec& spec, const FeatureMatrix& features, int k,
                               std::uint64_t seed, bool scale_features = true, unsigned threads = 1) {
    LabeledDataset ds;
    ds.chemical = "features";
    ds.grid.resize(features.values.cols());
    for (std::size_t i = 0; i < ds.grid.size(); ++i) ds.grid[i] = static_cast<double>(i);
    ds.intensities = features.values;
    ds.labels = features.labels;
    const int n_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    for (int c = 0; c < n_classes; ++c)
        ds.classes.push_back({static_cast<double>(n_classes - c), "class_" + std::to_string(c)});
    ds.meta.assign(ds.labels.size(), SampleMeta{SourceMethod::Synthetic, true, false});

    PipelineSpec pipeline;
    pipeline.kind = TransformKind::Scaled;
    pipeline.transform.pre_normalize = false;  // rows are already features
    pipeline.scale_features = scale_features;
    return cross_validate(spec, ds, pipeline, k, seed, threads);
}

// ---------------------------------------------------------------------------
// Hyperparameter search

struct LeaderboardRow {
    std::size_t config_index = 0;
    ModelSpec spec;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double fit_seconds = 0.0;
};

struct SearchResult {
    ModelSpec best;
    std::size_t best_index = 0;
    std::vector<LeaderboardRow> leaderboard;
};

// Evaluate candidate configurations by CV mean accuracy; ranking follows
// high accuracy > low standard deviation, then (optionally) low fit time.
// The time tie-break is off by default so ranking stays reproducible.
inline SearchResult search_hyperparameters(const std::vector<ModelSpec>& candidates,
                                           const LabeledDataset& ds, const PipelineSpec& pipeline,
                                           int k, std::uint64_t seed,
                                           std::size_t random_budget = 0, bool time_tiebreak = false,
                                           unsigned threads = 1) {
    if (candidates.empty()) throw ConfigError("search: empty candidate list");

    std::vector<std::size_t> picks(candidates.size());
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    if (random_budget > 0 && random_budget < candidates.size()) {
        Rng rng(seed, 0x5ea6c4);
        rng.shuffle(picks);
        picks.resize(random_budget);
        std::sort(picks.begin(), picks.end());
    }

    SearchResult result;
    for (std::size_t idx : picks) {
        const CvReport rep = cross_validate(candidates[idx], ds, pipeline, k, seed, threads);
        result.leaderboard.push_back(
            {idx, candidates[idx], rep.mean_accuracy, rep.std_accuracy, rep.total_fit_seconds()});
    }
    std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                     [&](const LeaderboardRow& a, const LeaderboardRow& b) {
                         if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
                         if (a.std_accuracy != b.std_accuracy) return a.std_accuracy < b.std_accuracy;
                         if (time_tiebreak && a.fit_seconds != b.fit_seconds)
                             return a.fit_seconds < b.fit_seconds;
                         return a.config_index < b.config_index;
                     });
    result.best = result.leaderboard.front().spec;
    result.best_index = result.leaderboard.front().config_index;
    return result;
}

}  // namespace ramanml
