// Command-line front end: seeded, reproducible pipeline runs.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "ramanml/cli.hpp"
#include "ramanml/ramanml.hpp"

namespace {

using namespace ramanml;

std::string default_out_dir() {
    if (const char* env = std::getenv("RAMANML_OUT_DIR")) return env;
    return "runs";
}

void add_common(CLI::App* cmd, cli::CommonOptions& common) {
    cmd->add_option("--out", common.out_dir, "output base directory")->capture_default_str();
    cmd->add_option("--seed", common.seed, "master seed; all randomness derives from it")
        ->capture_default_str();
    cmd->add_option("--threads", common.threads, "worker pool size (results are independent of it)")
        ->capture_default_str();
}

void add_treatment(CLI::App* cmd, cli::TreatmentOptions& treatment, std::string& transform_name) {
    cmd->add_option("--transform", transform_name, "scaled | hadamard | fourier")
        ->capture_default_str();
    cmd->add_flag("!--no-normalize", treatment.pre_normalize, "skip per-spectrum min-max normalization");
    cmd->add_flag("--unit-norm", treatment.unit_norm, "use L2 instead of min-max normalization");
    cmd->add_flag("--fourier-half", treatment.fourier_half,
                  "keep only the non-redundant half of the Fourier features");
    cmd->add_flag(
        "--scale{1},--no-scale{0}", treatment.scale,
        "force fold-local feature z-scoring on/off (default: on for scaled kind and for the cnn)");
}

void add_model(CLI::App* cmd, cli::ModelRunOptions& opts, std::string& model_name,
               std::string& metric_name, std::string& weights_name, std::string& criterion_name,
               std::string& kernel_name, KnnConfig& knn, ForestConfig& forest, SvcConfig& svc,
               CnnConfig& cnn) {
    cmd->add_option("--model", model_name, "knn | rfc | svc | cnn")->capture_default_str();
    cmd->add_option("--preset", opts.preset,
                    "tuned preset: r6g | r6g-ouzo | r6g-agnano | triclosan | chlorpyrifos");
    cmd->add_option("--n-neighbors", knn.n_neighbors, "knn: neighbor count");
    cmd->add_option("--metric", metric_name, "knn: euclidean | manhattan | minkowski");
    cmd->add_option("--minkowski-p", knn.minkowski_p, "knn: Minkowski exponent");
    cmd->add_option("--weights", weights_name, "knn: uniform | distance");
    cmd->add_option("--n-estimators", forest.n_estimators, "rfc: tree count");
    cmd->add_option("--max-features", forest.max_features, "rfc: features per split (0 = sqrt)");
    cmd->add_option("--criterion", criterion_name, "rfc: gini | entropy");
    cmd->add_option("--C", svc.c, "svc: regularization weight");
    cmd->add_option("--kernel", kernel_name, "svc: linear | rbf | polynomial");
    cmd->add_option("--degree", svc.degree, "svc: polynomial degree");
    cmd->add_option("--gamma", svc.rbf_gamma, "svc: RBF gamma (0 = auto)");
    cmd->add_option("--epochs", cnn.epochs, "cnn: training epochs");
    cmd->add_option("--batch-size", cnn.batch_size, "cnn: batch size");
    cmd->add_option("--kernel-width", cnn.kernel_width, "cnn: convolution kernel width");
    cmd->add_option("--learning-rate", cnn.learning_rate, "cnn: Adam step size");
    cmd->add_option("--filters", cnn.conv_filters, "cnn: filters per convolution layer");
}

void add_augment_flags(CLI::App* cmd, cli::ModelRunOptions& opts, std::string& flip_gate) {
    cmd->add_flag("--augment,!--no-augment", opts.augment,
                  "augment training folds (offset/stretch/flip); default on for the cnn");
    cmd->add_option("--multiplier", opts.aug.multiplier, "augmented copies per original");
    cmd->add_option("--flip-gate", flip_gate, "auto | always | never")->capture_default_str();
}

ModelSpec resolve_spec(const cli::ModelRunOptions& opts, const std::string& metric_name,
                       const std::string& weights_name, const std::string& criterion_name,
                       const std::string& kernel_name, KnnConfig knn, ForestConfig forest,
                       SvcConfig svc, const CnnConfig& cnn) {
    if (!opts.preset.empty()) return tuned_preset(opts.model, opts.preset);
    switch (opts.model) {
        case ModelKind::Knn:
            knn.metric = metric_name == "manhattan"   ? KnnMetric::Manhattan
                         : metric_name == "minkowski" ? KnnMetric::Minkowski
                                                      : KnnMetric::Euclidean;
            knn.weights = weights_name == "distance" ? KnnWeights::Distance : KnnWeights::Uniform;
            return knn;
        case ModelKind::Forest:
            forest.criterion =
                criterion_name == "entropy" ? SplitCriterion::Entropy : SplitCriterion::Gini;
            return forest;
        case ModelKind::Svc:
            svc.kernel = kernel_name == "rbf"          ? SvcKernel::Rbf
                         : kernel_name == "polynomial" ? SvcKernel::Polynomial
                                                       : SvcKernel::Linear;
            return svc;
        case ModelKind::Cnn: return cnn;
    }
    return forest;
}

FlipGate parse_flip_gate(const std::string& s) {
    if (s == "auto") return FlipGate::Auto;
    if (s == "always") return FlipGate::Always;
    if (s == "never") return FlipGate::Never;
    throw ConfigError("unknown flip gate: " + s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"concentration-class prediction from raw SERS spectra"};
    app.require_subcommand(1);

    // ingest
    cli::IngestOptions ingest;
    ingest.out_dir = default_out_dir();
    auto* cmd_ingest = app.add_subcommand("ingest", "load a manifest and export the labeled dataset");
    cmd_ingest->add_option("--manifest", ingest.manifest_path, "manifest JSON")->required();
    cmd_ingest->add_flag("--diagnostics", ingest.diagnostics,
                         "also export the peak histogram and Spearman correlation matrix");
    cmd_ingest->add_option("--bin-width", ingest.histogram_bin_width, "histogram bin width (cm^-1)")
        ->capture_default_str();
    add_common(cmd_ingest, ingest);

    // transform
    cli::TransformRunOptions transform;
    transform.out_dir = default_out_dir();
    std::string transform_kind = "hadamard";
    auto* cmd_transform = app.add_subcommand("transform", "export a treated feature matrix");
    cmd_transform->add_option("--manifest", transform.manifest_path, "manifest JSON")->required();
    add_treatment(cmd_transform, transform.treatment, transform_kind);
    add_common(cmd_transform, transform);

    // synth
    cli::SynthOptions synth;
    synth.out_dir = default_out_dir();
    int synth_classes = 5;
    auto* cmd_synth = app.add_subcommand("synth", "generate a seeded synthetic dataset + manifest");
    cmd_synth->add_option("--classes", synth_classes, "number of concentration classes")
        ->capture_default_str();
    cmd_synth->add_option("--per-class", synth.spec.spectra_per_class, "spectra per class")
        ->capture_default_str();
    cmd_synth->add_option("--noise", synth.spec.noise_level, "additive Gaussian noise sigma")
        ->capture_default_str();
    cmd_synth->add_flag("--baseline", synth.spec.baseline, "add a random linear baseline per spectrum");
    cmd_synth->add_option("--spacing", synth.spec.grid_spacing, "grid spacing (cm^-1)")
        ->capture_default_str();
    add_common(cmd_synth, synth);

    // augment
    cli::AugmentRunOptions augment;
    augment.out_dir = default_out_dir();
    std::string augment_flip_gate = "auto";
    auto* cmd_augment = app.add_subcommand("augment", "export an augmented copy of a dataset");
    cmd_augment->add_option("--manifest", augment.manifest_path, "manifest JSON")->required();
    cmd_augment->add_option("--multiplier", augment.aug.multiplier, "copies per original")
        ->capture_default_str();
    cmd_augment->add_option("--flip-gate", augment_flip_gate, "auto | always | never")
        ->capture_default_str();
    add_common(cmd_augment, augment);

    // train / cv share their option set
    cli::ModelRunOptions train, cv;
    train.out_dir = cv.out_dir = default_out_dir();
    std::string train_transform = "hadamard", cv_transform = "hadamard";
    std::string train_model = "rfc", cv_model = "rfc";
    std::string train_metric = "euclidean", cv_metric = "euclidean";
    std::string train_weights = "uniform", cv_weights = "uniform";
    std::string train_criterion = "gini", cv_criterion = "gini";
    std::string train_kernel = "linear", cv_kernel = "linear";
    std::string train_flip = "auto", cv_flip = "auto";
    KnnConfig train_knn, cv_knn;
    ForestConfig train_forest, cv_forest;
    SvcConfig train_svc, cv_svc;
    CnnConfig train_cnn, cv_cnn;

    auto* cmd_train = app.add_subcommand("train", "fit one model on the full dataset and save it");
    cmd_train->add_option("--manifest", train.manifest_path, "manifest JSON")->required();
    add_treatment(cmd_train, train.treatment, train_transform);
    add_model(cmd_train, train, train_model, train_metric, train_weights, train_criterion,
              train_kernel, train_knn, train_forest, train_svc, train_cnn);
    add_augment_flags(cmd_train, train, train_flip);
    add_common(cmd_train, train);

    auto* cmd_cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
    cmd_cv->add_option("--manifest", cv.manifest_path, "manifest JSON")->required();
    cmd_cv->add_option("--k", cv.k, "fold count")->capture_default_str();
    cmd_cv->add_option("--dataset-name", cv.dataset_name, "dataset label for report rows");
    add_treatment(cmd_cv, cv.treatment, cv_transform);
    add_model(cmd_cv, cv, cv_model, cv_metric, cv_weights, cv_criterion, cv_kernel, cv_knn, cv_forest,
              cv_svc, cv_cnn);
    add_augment_flags(cmd_cv, cv, cv_flip);
    add_common(cmd_cv, cv);

    // search
    cli::SearchRunOptions search;
    search.out_dir = default_out_dir();
    std::string search_transform = "hadamard", search_model = "rfc";
    auto* cmd_search = app.add_subcommand("search", "grid / seeded-random hyperparameter search");
    cmd_search->add_option("--manifest", search.manifest_path, "manifest JSON")->required();
    cmd_search->add_option("--grid", search.grid_path, "grid JSON (per-field candidate lists)")
        ->required();
    cmd_search->add_option("--model", search_model, "knn | rfc | svc | cnn")->capture_default_str();
    cmd_search->add_option("--k", search.k, "fold count")->capture_default_str();
    cmd_search->add_option("--budget", search.budget, "random-search budget (0 = exhaustive)")
        ->capture_default_str();
    cmd_search->add_flag("--time-tiebreak", search.time_tiebreak,
                         "break exact accuracy/std ties by fit time (not reproducible)");
    add_treatment(cmd_search, search.treatment, search_transform);
    add_common(cmd_search, search);

    // report
    cli::ReportRunOptions report;
    report.out_dir = default_out_dir();
    auto* cmd_report = app.add_subcommand("report", "importance profile + characteristic-peak match");
    cmd_report->add_option("--model-file", report.model_path, "trained forest model JSON")->required();
    cmd_report->add_option("--manifest", report.manifest_path, "manifest JSON")->required();
    cmd_report->add_option("--reference", report.reference_path,
                           "reference peak table CSV (wavenumber,assignment)");
    cmd_report->add_option("--shift-tolerance", report.match.shift_tolerance, "match window (cm^-1)")
        ->capture_default_str();
    cmd_report->add_option("--importance-threshold", report.match.importance_threshold,
                           "smoothed modified-importance cutoff")
        ->capture_default_str();
    add_common(cmd_report, report);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_ingest->parsed()) {
            cli::run_ingest(ingest);
        } else if (cmd_transform->parsed()) {
            transform.treatment.kind = transform_kind_from_string(transform_kind);
            cli::run_transform(transform);
        } else if (cmd_synth->parsed()) {
            if (synth_classes < 1) throw ConfigError("synth: --classes must be >= 1");
            synth.spec.concentrations.clear();
            for (int c = 0; c < synth_classes; ++c)
                synth.spec.concentrations.push_back(std::pow(10.0, -5.0 - c));
            synth.spec.peaks = {{520.0, 10.0, 40.0, 1.5},
                                {660.0, 12.0, 70.0, 0.6},
                                {780.0, 9.0, 55.0, 2.5},
                                {900.0, 11.0, 30.0, 1.0}};
            cli::run_synth(synth);
        } else if (cmd_augment->parsed()) {
            augment.aug.flip_gate = parse_flip_gate(augment_flip_gate);
            cli::run_augment(augment);
        } else if (cmd_train->parsed() || cmd_cv->parsed()) {
            auto& opts = cmd_train->parsed() ? train : cv;
            opts.treatment.kind =
                transform_kind_from_string(cmd_train->parsed() ? train_transform : cv_transform);
            opts.model = model_kind_from_string(cmd_train->parsed() ? train_model : cv_model);
            opts.aug.flip_gate = parse_flip_gate(cmd_train->parsed() ? train_flip : cv_flip);
            if (cmd_train->parsed())
                opts.spec = resolve_spec(opts, train_metric, train_weights, train_criterion,
                                         train_kernel, train_knn, train_forest, train_svc, train_cnn);
            else
                opts.spec = resolve_spec(opts, cv_metric, cv_weights, cv_criterion, cv_kernel, cv_knn,
                                         cv_forest, cv_svc, cv_cnn);
            const auto* active = cmd_train->parsed() ? cmd_train : cmd_cv;
            if (opts.model == ModelKind::Cnn && active->get_option("--augment")->count() == 0)
                opts.augment = true;  // augmentation on by default for the cnn
            if (cmd_train->parsed())
                cli::run_train(opts);
            else
                cli::run_cv(opts);
        } else if (cmd_search->parsed()) {
            search.treatment.kind = transform_kind_from_string(search_transform);
            search.model = model_kind_from_string(search_model);
            cli::run_search(search);
        } else if (cmd_report->parsed()) {
            cli::run_report(report);
        }
    } catch (const ramanml::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return cli::exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return cli::kExitNumeric;
    }
    return cli::kExitOk;
}
