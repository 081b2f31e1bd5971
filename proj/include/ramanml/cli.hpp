#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramanml/augment.hpp"
#include "ramanml/dataset.hpp"
#include "ramanml/errors.hpp"
#include "ramanml/eval.hpp"
#include "ramanml/models/model.hpp"
#include "ramanml/peaks.hpp"
#include "ramanml/presets.hpp"
#include "ramanml/report.hpp"
#include "ramanml/text.hpp"
#include "ramanml/transform.hpp"

namespace ramanml::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

inline int exit_code_for(const Error& e) {
    if (dynamic_cast<const NonConvergenceError*>(&e) ||
        dynamic_cast<const NumericalDivergenceError*>(&e) ||
        dynamic_cast<const DegenerateDataError*>(&e))
        return kExitNumeric;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const OrderTooLargeError*>(&e))
        return kExitUsage;
    return kExitData;
}

struct CommonOptions {
    std::string out_dir = "runs";
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

// Run directory name is derived from the resolved configuration, not from
// the clock, so identical runs land in identically named directories.
inline std::filesystem::path make_run_dir(const CommonOptions& common, const std::string& command,
                                          const nlohmann::json& config) {
    const auto dir = std::filesystem::path(common.out_dir) / (command + "-" + hex12(fnv1a(config.dump())));
    std::filesystem::create_directories(dir);
    std::ofstream cfg(dir / "config.json");
    cfg << config.dump(2) << "\n";
    return dir;
}

// ---------------------------------------------------------------------------
// Treatment options shared by transform/train/cv/search

struct TreatmentOptions {
    TransformKind kind = TransformKind::Hadamard;
    bool pre_normalize = true;
    bool unit_norm = false;
    bool fourier_half = false;
    int scale = -1;  // -1: kind default (on for scaled and for CNN), 0: off, 1: on

    bool scale_resolved(ModelKind model) const {
        if (scale >= 0) return scale != 0;
        return kind == TransformKind::Scaled || model == ModelKind::Cnn;
    }

    PipelineSpec pipeline(ModelKind model, const std::optional<AugmentationConfig>& aug) const {
        PipelineSpec p;
        p.kind = kind;
        p.transform.pre_normalize = pre_normalize;
        p.transform.unit_norm = unit_norm;
        p.transform.fourier_half = fourier_half;
        p.scale_features = scale_resolved(model);
        p.augmentation = aug;
        return p;
    }

    nlohmann::json to_json(ModelKind model) const {
        return {{"transform", to_string(kind)},
                {"pre_normalize", pre_normalize},
                {"unit_norm", unit_norm},
                {"fourier_half", fourier_half},
                {"scale_features", scale_resolved(model)}};
    }
};

inline nlohmann::json augmentation_to_json(const AugmentationConfig& a) {
    return {{"offset_fraction", a.offset_fraction},
            {"stretch_fraction", a.stretch_fraction},
            {"flip_count_min", a.flip_count_min},
            {"flip_count_max", a.flip_count_max},
            {"lognormal_mu", a.lognormal_mu},
            {"lognormal_sigma", a.lognormal_sigma},
            {"multiplier", a.multiplier},
            {"flip_gate",
             a.flip_gate == FlipGate::Auto ? "auto" : (a.flip_gate == FlipGate::Always ? "always" : "never")},
            {"flip_gate_threshold", a.flip_gate_threshold}};
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions : CommonOptions {
    std::string manifest_path;
    bool diagnostics = false;  // peak histogram + Spearman matrix exports
    double histogram_bin_width = 5.0;
};

inline std::filesystem::path run_ingest(const IngestOptions& opts) {
    const DatasetManifest manifest = read_manifest_json(opts.manifest_path);
    const LabeledDataset ds = load_dataset(manifest);

    nlohmann::json config = {{"command", "ingest"},
                             {"manifest", opts.manifest_path},
                             {"diagnostics", opts.diagnostics}};
    const auto dir = make_run_dir(opts, "ingest", config);

    save_dataset(ds, (dir / "dataset.csv").string(), (dir / "dataset.meta.json").string());

    const auto counts = ds.class_counts();
    std::string summary = "chemical: " + ds.chemical + "\n";
    summary += "classes: " + std::to_string(ds.n_classes()) + "\n";
    summary += "spectra: " + std::to_string(ds.size()) + "\n";
    summary += "concentration    spectra\n";
    for (std::size_t c = 0; c < ds.n_classes(); ++c) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-16s %zu\n", ds.classes[c].label.c_str(), counts[c]);
        summary += line;
    }

    if (opts.diagnostics) {
        const auto hist = peak_distribution(ds, opts.histogram_bin_width);
        std::ofstream hf(dir / "peak_histogram.csv");
        hf << "bin_start,count,normalized\n";
        for (std::size_t b = 0; b < hist.bin_start.size(); ++b)
            hf << format_full(hist.bin_start[b]) << ',' << hist.counts[b] << ','
               << format_full(hist.normalized[b]) << "\n";

        const auto corr = spearman_matrix(ds);
        std::ofstream cf(dir / "spearman.csv");
        for (std::size_t i = 0; i < corr.values.rows(); ++i) {
            for (std::size_t j = 0; j < corr.values.cols(); ++j)
                cf << (j ? "," : "") << format_full(corr.values(i, j));
            cf << "\n";
        }
        char line[96];
        std::snprintf(line, sizeof(line), "average spearman correlation: %.4f\n", corr.average);
        summary += line;
    }

    std::ofstream sf(dir / "summary.txt");
    sf << summary;
    std::fputs(summary.c_str(), stdout);
    return dir;
}

// ---------------------------------------------------------------------------
// transform

struct TransformRunOptions : CommonOptions {
    std::string manifest_path;
    TreatmentOptions treatment;
};

inline std::filesystem::path run_transform(const TransformRunOptions& opts) {
    const LabeledDataset ds = load_dataset(read_manifest_json(opts.manifest_path));
    TransformOptions t{opts.treatment.pre_normalize, opts.treatment.unit_norm,
                       opts.treatment.fourier_half};
    const FeatureMatrix fm = transform_dataset(ds, opts.treatment.kind, t);

    nlohmann::json config = {{"command", "transform"},
                             {"manifest", opts.manifest_path},
                             {"treatment", opts.treatment.to_json(ModelKind::Forest)}};
    const auto dir = make_run_dir(opts, "transform", config);
    save_feature_matrix(fm, (dir / "features.csv").string(), (dir / "features.meta.json").string());
    std::printf("transform: %zu rows x %zu features (%s)\n", fm.values.rows(), fm.values.cols(),
                to_string(fm.kind).c_str());
    return dir;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions : CommonOptions {
    SyntheticSpec spec;
    bool emit_manifest = true;
};

inline std::filesystem::path run_synth(const SynthOptions& opts) {
    SyntheticSpec spec = opts.spec;
    spec.seed = opts.seed;
    const LabeledDataset ds = generate_synthetic_dataset(spec);

    nlohmann::json config = {{"command", "synth"},
                             {"seed", spec.seed},
                             {"classes", ds.n_classes()},
                             {"per_class", spec.spectra_per_class},
                             {"noise", spec.noise_level},
                             {"baseline", spec.baseline},
                             {"grid", {spec.min_wavenumber, spec.max_wavenumber, spec.grid_spacing}}};
    const auto dir = make_run_dir(opts, "synth", config);
    save_dataset(ds, (dir / "dataset.csv").string(), (dir / "dataset.meta.json").string());

    if (opts.emit_manifest) {
        const auto spectra_dir = dir / "spectra";
        std::filesystem::create_directories(spectra_dir);
        nlohmann::json manifest;
        manifest["grid"] = {{"spacing", spec.grid_spacing},
                            {"min_wavenumber", spec.min_wavenumber},
                            {"max_wavenumber", spec.max_wavenumber}};
        manifest["min_spectra_per_class"] = 1;
        manifest["entries"] = nlohmann::json::array();
        for (std::size_t r = 0; r < ds.size(); ++r) {
            char name[64];
            std::snprintf(name, sizeof(name), "spectra/s%04zu.csv", r);
            std::ofstream f(dir / name);
            f << "wavenumber,intensity\n";
            for (std::size_t g = 0; g < ds.grid.size(); ++g)
                f << format_full(ds.grid[g]) << ',' << format_full(ds.intensities(r, g)) << "\n";
            manifest["entries"].push_back(
                {{"path", name},
                 {"chemical", ds.chemical},
                 {"concentration", ds.classes[static_cast<std::size_t>(ds.labels[r])].concentration},
                 {"source_method", "synthetic"},
                 {"baseline_corrected", ds.meta[r].baseline_corrected}});
        }
        std::ofstream mf(dir / "manifest.json");
        mf << manifest.dump(2) << "\n";
    }
    std::printf("synth: %zu spectra, %zu classes -> %s\n", ds.size(), ds.n_classes(),
                dir.string().c_str());
    return dir;
}

// ---------------------------------------------------------------------------
// augment

struct AugmentRunOptions : CommonOptions {
    std::string manifest_path;
    AugmentationConfig aug;
};

inline std::filesystem::path run_augment(const AugmentRunOptions& opts) {
    const LabeledDataset ds = load_dataset(read_manifest_json(opts.manifest_path));
    AugmentationConfig aug = opts.aug;
    aug.seed = opts.seed;
    const LabeledDataset out = augment_dataset(ds, aug);

    nlohmann::json config = {{"command", "augment"},
                             {"manifest", opts.manifest_path},
                             {"seed", opts.seed},
                             {"augmentation", augmentation_to_json(aug)}};
    const auto dir = make_run_dir(opts, "augment", config);
    save_dataset(out, (dir / "dataset.csv").string(), (dir / "dataset.meta.json").string());
    std::printf("augment: %zu -> %zu spectra\n", ds.size(), out.size());
    return dir;
}

// ---------------------------------------------------------------------------
// train / cv

struct ModelRunOptions : CommonOptions {
    std::string manifest_path;
    TreatmentOptions treatment;
    ModelKind model = ModelKind::Forest;
    std::string preset;   // optional tuned preset name
    ModelSpec spec = ForestConfig{};
    bool augment = false;
    AugmentationConfig aug;
    int k = 5;
    std::string dataset_name;  // report label; defaults to the manifest chemical
};

inline nlohmann::json model_run_config_json(const char* command, const ModelRunOptions& opts) {
    nlohmann::json config = {{"command", command},
                             {"manifest", opts.manifest_path},
                             {"seed", opts.seed},
                             {"k", opts.k},
                             {"model", model_spec_to_json(opts.spec)},
                             {"treatment", opts.treatment.to_json(opts.model)}};
    if (opts.augment) config["augmentation"] = augmentation_to_json(opts.aug);
    return config;
}

inline void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (std::size_t e = 0; e < h.train_loss.size(); ++e)
        out << (e + 1) << ',' << format_full(h.train_loss[e]) << ',' << format_full(h.train_accuracy[e])
            << ',' << format_full(h.val_loss[e]) << ',' << format_full(h.val_accuracy[e]) << "\n";
}

inline std::filesystem::path run_train(const ModelRunOptions& opts) {
    const LabeledDataset ds = load_dataset(read_manifest_json(opts.manifest_path));
    const auto dir = make_run_dir(opts, "train", model_run_config_json("train", opts));

    std::optional<AugmentationConfig> aug;
    if (opts.augment) {
        aug = opts.aug;
    }
    const PipelineSpec pipeline = opts.treatment.pipeline(opts.model, aug);
    detail::FoldFit fit = detail::fit_fold(opts.spec, ds, pipeline, opts.seed, opts.threads);
    save_model(fit.model, (dir / "model.json").string());
    if (fit.scaler) {
        nlohmann::json sj = {{"means", fit.scaler->means}, {"stds", fit.scaler->stds}};
        std::ofstream sf(dir / "scaler.json");
        sf << sj.dump(2) << "\n";
    }
    if (opts.model == ModelKind::Cnn) write_history_csv(fit.history, dir / "history.csv");
    std::printf("train: %s model saved to %s\n", to_string(opts.model).c_str(),
                (dir / "model.json").string().c_str());
    return dir;
}

inline std::filesystem::path run_cv(const ModelRunOptions& opts) {
    const LabeledDataset ds = load_dataset(read_manifest_json(opts.manifest_path));
    const auto dir = make_run_dir(opts, "cv", model_run_config_json("cv", opts));

    std::optional<AugmentationConfig> aug;
    if (opts.augment) aug = opts.aug;
    const PipelineSpec pipeline = opts.treatment.pipeline(opts.model, aug);
    const CvReport report = cross_validate(opts.spec, ds, pipeline, opts.k, opts.seed, opts.threads);

    const std::string dataset_name = opts.dataset_name.empty() ? ds.chemical : opts.dataset_name;

    nlohmann::json j;
    j["dataset"] = dataset_name;
    j["transform"] = to_string(opts.treatment.kind);
    j["model"] = model_spec_to_json(opts.spec);
    j["k"] = opts.k;
    j["seed"] = opts.seed;
    j["treatment"] = opts.treatment.to_json(opts.model);
    j["fold_accuracy"] = report.fold_accuracy;
    j["mean_accuracy"] = report.mean_accuracy;
    j["std_accuracy"] = report.std_accuracy;
    j["regression_error"] = report.regression_error_sum;
    j["regression_error_mean"] = report.regression_error_mean;
    j["fold_assignment"] = report.fold_assignment;
    j["fold_model_digest"] = report.fold_model_digest;
    nlohmann::json confusion = nlohmann::json::array();
    for (std::size_t r = 0; r < report.confusion.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < report.confusion.cols(); ++c)
            row.push_back(report.confusion(r, c));
        confusion.push_back(std::move(row));
    }
    j["confusion"] = std::move(confusion);
    if (opts.augment) j["augmentation"] = augmentation_to_json(opts.aug);
    {
        std::ofstream rf(dir / "report.json");
        rf << j.dump(2) << "\n";
    }
    {
        std::ofstream cf(dir / "report.csv");
        cf << "dataset,transform,model,mean_accuracy,std_accuracy\n";
        cf << dataset_name << ',' << to_string(opts.treatment.kind) << ',' << to_string(opts.model)
           << ',' << format_full(report.mean_accuracy) << ',' << format_full(report.std_accuracy)
           << "\n";
    }
    {
        std::ofstream cf(dir / "confusion.csv");
        for (std::size_t r = 0; r < report.confusion.rows(); ++r) {
            for (std::size_t c = 0; c < report.confusion.cols(); ++c)
                cf << (c ? "," : "") << report.confusion(r, c);
            cf << "\n";
        }
    }
    if (opts.model == ModelKind::Cnn) write_history_csv(report.last_history, dir / "history.csv");
    {
        // wall-clock timings are intentionally kept out of the report files
        std::ofstream tf(dir / "timings.txt");
        for (std::size_t f = 0; f < report.fold_fit_seconds.size(); ++f)
            tf << "fold " << f << ": " << report.fold_fit_seconds[f] << " s\n";
    }
    std::printf("cv: %s %s %s mean=%.4f std=%.4f\n", dataset_name.c_str(),
                to_string(opts.treatment.kind).c_str(), to_string(opts.model).c_str(),
                report.mean_accuracy, report.std_accuracy);
    return dir;
}

// ---------------------------------------------------------------------------
// search

struct SearchRunOptions : CommonOptions {
    std::string manifest_path;
    std::string grid_path;
    TreatmentOptions treatment;
    ModelKind model = ModelKind::Forest;
    std::size_t budget = 0;  // 0: exhaustive
    bool time_tiebreak = false;
    int k = 5;
};

// Full-factorial expansion of a per-field candidate grid.
inline std::vector<ModelSpec> expand_grid(ModelKind kind, const nlohmann::json& grid) {
    const auto list = [&](const char* key, nlohmann::json fallback) {
        return grid.contains(key) ? grid.at(key) : fallback;
    };
    std::vector<ModelSpec> specs;
    switch (kind) {
        case ModelKind::Forest: {
            for (const auto& n : list("n_estimators", {100}))
                for (const auto& f : list("max_features", {0}))
                    for (const auto& c : list("criterion", {"gini"})) {
                        ForestConfig cfg;
                        cfg.n_estimators = n.get<int>();
                        cfg.max_features = f.get<int>();
                        cfg.criterion = c.get<std::string>() == "entropy" ? SplitCriterion::Entropy
                                                                          : SplitCriterion::Gini;
                        specs.push_back(cfg);
                    }
            break;
        }
        case ModelKind::Knn: {
            for (const auto& n : list("n_neighbors", {5}))
                for (const auto& m : list("metric", {"euclidean"}))
                    for (const auto& w : list("weights", {"uniform"})) {
                        KnnConfig cfg;
                        cfg.n_neighbors = n.get<int>();
                        const auto ms = m.get<std::string>();
                        cfg.metric = ms == "euclidean"   ? KnnMetric::Euclidean
                                     : ms == "manhattan" ? KnnMetric::Manhattan
                                                         : KnnMetric::Minkowski;
                        cfg.minkowski_p = grid.value("minkowski_p", 3.0);
                        cfg.weights =
                            w.get<std::string>() == "distance" ? KnnWeights::Distance : KnnWeights::Uniform;
                        specs.push_back(cfg);
                    }
            break;
        }
        case ModelKind::Svc: {
            for (const auto& c : list("c", {1.0}))
                for (const auto& kern : list("kernel", {"linear"}))
                    for (const auto& d : list("degree", {3})) {
                        SvcConfig cfg;
                        cfg.c = c.get<double>();
                        const auto ks = kern.get<std::string>();
                        cfg.kernel = ks == "linear" ? SvcKernel::Linear
                                     : ks == "rbf"  ? SvcKernel::Rbf
                                                    : SvcKernel::Polynomial;
                        cfg.degree = d.get<int>();
                        specs.push_back(cfg);
                    }
            break;
        }
        case ModelKind::Cnn: {
            for (const auto& kw : list("kernel_width", {3}))
                for (const auto& lr : list("learning_rate", {1e-3}))
                    for (const auto& ep : list("epochs", {20})) {
                        CnnConfig cfg;
                        cfg.kernel_width = kw.get<int>();
                        cfg.learning_rate = lr.get<double>();
                        cfg.epochs = ep.get<int>();
                        specs.push_back(cfg);
                    }
            break;
        }
    }
    if (specs.empty()) throw ConfigError("search: grid expands to zero candidates");
    return specs;
}

inline std::filesystem::path run_search(const SearchRunOptions& opts) {
    const LabeledDataset ds = load_dataset(read_manifest_json(opts.manifest_path));
    std::ifstream gf(opts.grid_path);
    if (!gf) throw FileError("cannot open grid " + opts.grid_path);
    nlohmann::json grid;
    try {
        gf >> grid;
    } catch (const nlohmann::json::exception& e) {
        throw FileError("grid " + opts.grid_path + ": " + e.what());
    }
    const auto candidates = expand_grid(opts.model, grid);

    nlohmann::json config = {{"command", "search"},   {"manifest", opts.manifest_path},
                             {"seed", opts.seed},     {"k", opts.k},
                             {"grid", grid},          {"budget", opts.budget},
                             {"model", to_string(opts.model)},
                             {"treatment", opts.treatment.to_json(opts.model)}};
    const auto dir = make_run_dir(opts, "search", config);

    const PipelineSpec pipeline = opts.treatment.pipeline(opts.model, std::nullopt);
    const SearchResult result = search_hyperparameters(candidates, ds, pipeline, opts.k, opts.seed,
                                                       opts.budget, opts.time_tiebreak, opts.threads);

    nlohmann::json j;
    j["best"] = model_spec_to_json(result.best);
    j["best_index"] = result.best_index;
    j["leaderboard"] = nlohmann::json::array();
    for (const auto& row : result.leaderboard)
        j["leaderboard"].push_back({{"config_index", row.config_index},
                                    {"spec", model_spec_to_json(row.spec)},
                                    {"mean_accuracy", row.mean_accuracy},
                                    {"std_accuracy", row.std_accuracy}});
    std::ofstream rf(dir / "leaderboard.json");
    rf << j.dump(2) << "\n";
    std::printf("search: %zu candidates, best mean=%.4f\n", result.leaderboard.size(),
                result.leaderboard.front().mean_accuracy);
    return dir;
}

// ---------------------------------------------------------------------------
// report

struct ReportRunOptions : CommonOptions {
    std::string model_path;
    std::string manifest_path;
    std::string reference_path;  // optional
    PeakMatchConfig match;
};

inline std::filesystem::path run_report(const ReportRunOptions& opts) {
    const TrainedModel model = load_model(opts.model_path);
    const auto importances = model.importances();
    if (!importances)
        throw ConfigError("report: model kind '" + to_string(model.kind()) +
                          "' has no feature importances; train a random forest");

    const LabeledDataset ds = load_dataset(read_manifest_json(opts.manifest_path));
    if (importances->size() != ds.grid.size())
        throw LengthMismatchError(
            "report: model has " + std::to_string(importances->size()) + " feature importances but the "
            "dataset grid has " + std::to_string(ds.grid.size()) +
            " wavenumbers; train the forest on the scaled (wavenumber) treatment");

    nlohmann::json config = {{"command", "report"},
                             {"model", opts.model_path},
                             {"manifest", opts.manifest_path},
                             {"reference", opts.reference_path},
                             {"shift_tolerance", opts.match.shift_tolerance},
                             {"importance_threshold", opts.match.importance_threshold}};
    const auto dir = make_run_dir(opts, "report", config);

    const ImportanceProfile profile = ImportanceProfile::from_raw(ds.grid, *importances);
    save_importance_profile(profile, (dir / "importance.csv").string());
    save_profile_plot_csv(ds, profile, (dir / "plot.csv").string());

    std::vector<ReferencePeak> reference;
    if (!opts.reference_path.empty()) reference = read_reference_table(opts.reference_path);
    const auto peaks = representative_peaks(ds);
    const PeakMatchReport match = match_peaks(profile, peaks, reference, opts.match);
    {
        std::ofstream jf(dir / "peak_match.json");
        jf << peak_match_report_to_json(match).dump(2) << "\n";
    }
    save_peak_match_csv(match, (dir / "peak_match.csv").string());
    std::printf("report: %zu reference rows, %zu matches written to %s\n", reference.size(),
                match.rows.size(), dir.string().c_str());
    return dir;
}

}  // namespace ramanml::cli
