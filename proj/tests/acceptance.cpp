// Acceptance suite: one pass/fail line per criterion.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "ramanml/cli.hpp"
#include "ramanml/ramanml.hpp"

using namespace ramanml;

namespace {

void report_line(const char* name, bool ok) {
    std::printf("[acceptance] %-26s %s\n", name, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
}

void skip_line(const char* name, const char* why) {
    std::printf("[acceptance] %-26s SKIP (%s)\n", name, why);
    std::fflush(stdout);
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// the seeded noise-free fixture for the synthetic-pipeline criterion:
// 5 classes x 10 spectra, amplitudes strictly monotone in concentration,
// per-peak sensitivities so classes differ in shape as well as scale
SyntheticSpec acceptance_spec() {
    SyntheticSpec spec;
    spec.concentrations = {1e-5, 1e-6, 1e-7, 1e-8, 1e-9};
    spec.spectra_per_class = 10;
    spec.grid_spacing = 9.5;
    spec.min_wavenumber = 400.0;
    spec.max_wavenumber = 1000.0;
    spec.peaks = {{520.0, 10.0, 40.0, 1.5},
                  {660.0, 12.0, 70.0, 0.6},
                  {780.0, 9.0, 55.0, 2.5},
                  {900.0, 11.0, 30.0, 1.0}};
    spec.noise_level = 0.0;
    spec.baseline = false;
    spec.seed = 20240101;
    return spec;
}

// noisy baseline-bearing variant standing in for the R6G dataset
SyntheticSpec r6g_like_spec() {
    SyntheticSpec spec = acceptance_spec();
    spec.noise_level = 0.6;
    spec.baseline = true;
    spec.baseline_offset_mean = 20.0;
    spec.baseline_offset_std = 2.0;
    spec.baseline_slope_max = 0.01;
    return spec;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("transform correctness") {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;

    // tie the closed-form oracle to the recursive construction first
    for (unsigned m : {0u, 1u, 5u, 9u}) {
        const auto h = hadamard_matrix({m});
        const std::size_t n = std::size_t{1} << m;
        for (std::size_t i = 0; i < n && ok; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double expect = (std::popcount(i & j) & 1) ? -1.0 : 1.0;
                if (h(i, j) != expect) {
                    ok = false;
                    break;
                }
            }
    }

    // 1000 random vectors, lengths 1..4096
    Rng rng(2024);
    double max_err = 0.0, max_inv_err = 0.0;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const std::size_t len = 1 + rng.uniform_index(4096);
        std::vector<double> x(len);
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);

        const auto fast = fwht(x);
        const auto naive = oracles::hadamard_multiply(x);
        for (std::size_t i = 0; i < fast.size(); ++i)
            max_err = std::max(max_err, std::abs(fast[i] - naive[i]));

        // fwht(fwht(x)) / 2^m recovers the padded input
        const auto twice = fwht(fast);
        const auto scale = static_cast<double>(fast.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            const double orig = i < len ? x[i] : 0.0;
            max_inv_err = std::max(max_inv_err, std::abs(twice[i] / scale - orig));
        }
        ok = max_err < 1e-9 && max_inv_err < 1e-9;
    }

    // fourier_features vs direct DFT summation
    double max_dft_err = 0.0;
    for (int trial = 0; trial < 60 && ok; ++trial) {
        const std::size_t len = 1 + rng.uniform_index(600);
        std::vector<double> x(len);
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);
        const auto features = fourier_features(x);
        const auto naive = oracles::dft(x);
        for (std::size_t k = 0; k < len; ++k) {
            max_dft_err = std::max(max_dft_err, std::abs(features[k] - naive[k].real()));
            max_dft_err = std::max(max_dft_err, std::abs(features[k + len] - naive[k].imag()));
        }
        ok = ok && max_dft_err < 1e-9;
    }

    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 30.0;
    report_line("transform-correctness", ok);
    CHECK(max_err < 1e-9);
    CHECK(max_inv_err < 1e-9);
    CHECK(max_dft_err < 1e-9);
    CHECK(elapsed < 30.0);
}

TEST_CASE("cnn gradient check") {
    const auto t0 = std::chrono::steady_clock::now();

    CnnConfig cfg;
    cfg.conv_filters = 2;
    cfg.kernel_width = 3;
    cfg.dropout_rate = 0.0;
    cfg.hidden_units = 4;
    cfg.seed = 12;
    auto net = make_cnn(cfg, 16, 3);

    Rng rng(6);
    Matrix batch(4, 16);
    for (auto& v : batch.data()) v = rng.uniform(-1.0, 1.0);
    const std::vector<int> labels{0, 1, 2, 1};

    const double err = gradient_check(net, batch, labels, 1e-5);
    const double elapsed = seconds_since(t0);
    const bool ok = err < 1e-4 && elapsed < 60.0;
    report_line("cnn-gradient-check", ok);
    CHECK(err < 1e-4);
    CHECK(elapsed < 60.0);
}

TEST_CASE("oracle equivalence") {
    bool ok = true;

    // k-NN vs exhaustive search on 50 random instances
    Rng rng(99);
    for (int instance = 0; instance < 50; ++instance) {
        const std::size_t n_train = 10 + rng.uniform_index(20);
        const std::size_t dims = 2 + rng.uniform_index(5);
        const int n_classes = 2 + static_cast<int>(rng.uniform_index(3));
        Matrix train(n_train, dims);
        for (auto& v : train.data()) v = rng.uniform(-1.0, 1.0);
        std::vector<int> labels(n_train);
        for (auto& l : labels) l = static_cast<int>(rng.uniform_index(n_classes));

        KnnConfig cfg;
        cfg.n_neighbors = 1 + static_cast<int>(rng.uniform_index(std::min<std::size_t>(5, n_train)));
        const auto metric_pick = rng.uniform_index(3);
        cfg.metric = metric_pick == 0   ? KnnMetric::Euclidean
                     : metric_pick == 1 ? KnnMetric::Manhattan
                                        : KnnMetric::Minkowski;
        cfg.weights = rng.coin() ? KnnWeights::Uniform : KnnWeights::Distance;

        const auto model = knn_fit(train, labels, cfg);
        Matrix queries(8, dims);
        for (auto& v : queries.data()) v = rng.uniform(-1.0, 1.0);
        const auto got = knn_predict(model, queries);
        for (std::size_t q = 0; q < queries.rows(); ++q)
            ok = ok && got[q] == oracles::knn_predict(train, labels, queries.row(q), cfg, n_classes);
    }
    const bool knn_ok = ok;

    // SVC dual objective vs projected gradient on <= 20-point problems
    bool svc_ok = true;
    for (int instance = 0; instance < 3; ++instance) {
        Rng srng(31 + instance);
        const std::size_t n = 12 + 2 * static_cast<std::size_t>(instance);
        Matrix x(n, 2);
        std::vector<int> labels(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = i < n / 2 ? 0 : 1;
            y[i] = labels[i] == 0 ? 1 : -1;
            x(i, 0) = srng.uniform(0.0, 1.0) + (labels[i] == 0 ? 0.0 : 1.2);
            x(i, 1) = srng.uniform(0.0, 1.0);
        }
        SvcConfig cfg;
        cfg.c = 1.0;
        cfg.kernel = SvcKernel::Linear;
        cfg.tolerance = 1e-5;
        cfg.max_passes = 20000;
        const auto model = svc_fit(x, labels, cfg);
        const double oracle =
            oracles::svc_dual_objective(x, y, cfg.c, cfg.kernel, model.gamma, cfg.degree);
        svc_ok = svc_ok && std::abs(model.machines.front().dual_objective - oracle) < 1e-3;
    }

    // Spearman matrices vs rank-then-Pearson brute force
    bool spearman_ok = true;
    {
        Rng srng(5);
        LabeledDataset ds;
        ds.chemical = "t";
        const std::size_t n_spec = 9, n_wn = 12;
        ds.grid.resize(n_wn);
        for (std::size_t i = 0; i < n_wn; ++i) ds.grid[i] = 400.0 + 2.0 * static_cast<double>(i);
        ds.intensities = Matrix(n_spec, n_wn);
        for (auto& v : ds.intensities.data()) v = srng.uniform(0.0, 5.0);
        ds.labels.assign(n_spec, 0);
        ds.classes = {{1e-5, "1e-05"}};
        ds.meta.assign(n_spec, {SourceMethod::Synthetic, true, false});

        const auto corr = spearman_matrix(ds);
        std::vector<double> col_i(n_spec), col_j(n_spec);
        for (std::size_t i = 0; i < n_wn; ++i)
            for (std::size_t j = 0; j < n_wn; ++j) {
                for (std::size_t s = 0; s < n_spec; ++s) {
                    col_i[s] = ds.intensities(s, i);
                    col_j[s] = ds.intensities(s, j);
                }
                const double expect = i == j ? 1.0 : oracles::spearman(col_i, col_j);
                spearman_ok = spearman_ok && std::abs(corr.values(i, j) - expect) < 1e-12;
            }
    }

    ok = knn_ok && svc_ok && spearman_ok;
    report_line("oracle-equivalence", ok);
    CHECK(knn_ok);
    CHECK(svc_ok);
    CHECK(spearman_ok);
}

TEST_CASE("synthetic pipeline accuracy") {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ds = generate_synthetic_dataset(acceptance_spec());

    PipelineSpec classical;  // z-scored raw intensities
    classical.kind = TransformKind::Scaled;
    classical.transform.pre_normalize = false;

    ForestConfig rf;
    rf.n_estimators = 50;
    rf.max_features = 8;
    const double forest_mean = cross_validate(rf, ds, classical, 5, 1).mean_accuracy;

    KnnConfig knn;
    knn.n_neighbors = 2;
    knn.weights = KnnWeights::Distance;
    const double knn_mean = cross_validate(knn, ds, classical, 5, 1).mean_accuracy;

    SvcConfig svc;
    svc.c = 100.0;
    svc.kernel = SvcKernel::Linear;
    const double svc_mean = cross_validate(svc, ds, classical, 5, 1).mean_accuracy;

    CnnConfig cnn;  // 64 filters, kernel 3, dropout 0.5, batch 50, 20 epochs
    PipelineSpec cnn_pipeline;
    cnn_pipeline.kind = TransformKind::Hadamard;
    AugmentationConfig aug;
    aug.multiplier = 10;
    cnn_pipeline.augmentation = aug;
    const double cnn_mean = cross_validate(cnn, ds, cnn_pipeline, 5, 1).mean_accuracy;

    const double elapsed = seconds_since(t0);
    const bool ok =
        forest_mean >= 0.95 && knn_mean >= 0.95 && svc_mean >= 0.95 && cnn_mean >= 0.90 && elapsed < 300.0;
    report_line("synthetic-pipeline", ok);
    std::printf("             forest=%.3f knn=%.3f svc=%.3f cnn=%.3f (%.1fs)\n", forest_mean, knn_mean,
                svc_mean, cnn_mean, elapsed);
    CHECK(forest_mean >= 0.95);
    CHECK(knn_mean >= 0.95);
    CHECK(svc_mean >= 0.95);
    CHECK(cnn_mean >= 0.90);
    CHECK(elapsed < 300.0);
}

TEST_CASE("paper reproduction (public raw spectra)") {
    // Needs the published spectra, which are not bundled. Point
    // RAMANML_SERS_DATA at a directory holding r6g_agnano.json,
    // r6g_combined.json and triclosan.json manifests to enable.
    const char* data_dir = std::getenv("RAMANML_SERS_DATA");
    if (data_dir == nullptr) {
        skip_line("paper-reproduction", "RAMANML_SERS_DATA not set; raw spectra unavailable");
        return;
    }
    const std::filesystem::path base(data_dir);

    bool ok = true;

    {  // R6G silver-nanoparticle subset: Hadamard + tuned forest >= 0.95
        const auto ds = load_dataset(read_manifest_json((base / "r6g_agnano.json").string()));
        PipelineSpec pipeline;
        pipeline.kind = TransformKind::Hadamard;
        const auto rep =
            cross_validate(tuned_preset(ModelKind::Forest, "r6g-agnano"), ds, pipeline, 5, 1);
        std::printf("             r6g-agnano hadamard rfc: %.3f (paper 1.00)\n", rep.mean_accuracy);
        ok = ok && rep.mean_accuracy >= 0.95;
    }
    {  // R6G combined: Hadamard + tuned SVC within 0.10 of 0.847
        const auto ds = load_dataset(read_manifest_json((base / "r6g_combined.json").string()));
        PipelineSpec pipeline;
        pipeline.kind = TransformKind::Hadamard;
        pipeline.scale_features = true;
        const auto rep = cross_validate(tuned_preset(ModelKind::Svc, "r6g"), ds, pipeline, 5, 1);
        std::printf("             r6g-combined hadamard svc: %.3f (paper 0.847)\n", rep.mean_accuracy);
        ok = ok && std::abs(rep.mean_accuracy - 0.847) <= 0.10;
    }
    {  // triclosan: Hadamard + tuned forest, 3 folds, within 0.10 of 0.822
        const auto ds = load_dataset(read_manifest_json((base / "triclosan.json").string()));
        PipelineSpec pipeline;
        pipeline.kind = TransformKind::Hadamard;
        const auto rep =
            cross_validate(tuned_preset(ModelKind::Forest, "triclosan"), ds, pipeline, 3, 1);
        std::printf("             triclosan hadamard rfc: %.3f (paper 0.822)\n", rep.mean_accuracy);
        ok = ok && std::abs(rep.mean_accuracy - 0.822) <= 0.10;
    }
    {  // CNN Fourier on R6G combined: soft target >= 0.70 with the default config
        const auto ds = load_dataset(read_manifest_json((base / "r6g_combined.json").string()));
        PipelineSpec pipeline;
        pipeline.kind = TransformKind::Fourier;
        AugmentationConfig aug;
        aug.multiplier = 10;
        pipeline.augmentation = aug;
        const auto rep = cross_validate(CnnConfig{}, ds, pipeline, 5, 1);
        std::printf("             r6g-combined fourier cnn: %.3f (paper 0.852)\n", rep.mean_accuracy);
        ok = ok && rep.mean_accuracy >= 0.70;
    }

    report_line("paper-reproduction", ok);
    CHECK(ok);
}

TEST_CASE("augmentation fidelity") {
    const auto ds = generate_synthetic_dataset(r6g_like_spec());
    AugmentationConfig cfg;
    cfg.multiplier = 10;
    cfg.seed = 77;
    const auto augmented = augment_dataset(ds, cfg);

    const auto before = peak_distribution(ds, 5.0);
    const auto after = peak_distribution(augmented, 5.0);
    const double tv = total_variation_distance(before, after);
    const bool ok = tv < 0.15;
    report_line("augmentation-fidelity", ok);
    std::printf("             tv-distance=%.4f\n", tv);
    CHECK(tv < 0.15);
}

TEST_CASE("metric exactness") {
    const bool reg_ok = regression_error({0, 1, 2}, {0, 1, 2}, 8) == 0.0 &&
                        regression_error({3}, {1}, 8) == 0.0625 &&
                        regression_error({1, 3, 4}, {0, 2, 1}, 8) == 0.171875;

    const bool mi_ok = modified_importance(std::exp(-1.0)) == 1.0;

    Rng rng(12);
    std::vector<double> v(257);
    for (auto& x : v) x = rng.uniform(-4.0, 4.0);
    bool roll_ok = true;
    for (const std::size_t half : {1ul, 2ul, 4ul}) {
        const auto got = rolling_average(v, half);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t lo = i >= half ? i - half : 0;
            const std::size_t hi = std::min(v.size() - 1, i + half);
            double s = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) s += v[j];
            roll_ok = roll_ok && std::abs(got[i] - s / static_cast<double>(hi - lo + 1)) < 1e-12;
        }
    }

    const bool ok = reg_ok && mi_ok && roll_ok;
    report_line("metric-exactness", ok);
    CHECK(reg_ok);
    CHECK(mi_ok);
    CHECK(roll_ok);
}

TEST_CASE("determinism of cv runs") {
    const auto base = std::filesystem::temp_directory_path() / "ramanml_acceptance_det";
    std::filesystem::remove_all(base);
    std::filesystem::create_directories(base);

    cli::SynthOptions synth;
    synth.out_dir = (base / "data").string();
    synth.seed = 5;
    synth.spec = r6g_like_spec();
    synth.spec.noise_level = 0.4;
    const auto data_dir = cli::run_synth(synth);

    cli::ModelRunOptions opts;
    opts.manifest_path = (data_dir / "manifest.json").string();
    opts.seed = 21;
    opts.k = 5;
    opts.model = ModelKind::Forest;
    ForestConfig rf;
    rf.n_estimators = 20;
    rf.max_features = 8;
    opts.spec = rf;
    opts.treatment.kind = TransformKind::Hadamard;

    auto one = opts;
    one.out_dir = (base / "run1").string();
    one.threads = 1;
    auto eight = opts;
    eight.out_dir = (base / "run8").string();
    eight.threads = 8;

    const auto d1 = cli::run_cv(one);
    const auto d8 = cli::run_cv(eight);

    bool ok = d1.filename() == d8.filename();
    for (const char* name : {"report.json", "report.csv", "confusion.csv", "config.json"})
        ok = ok && slurp(d1 / name) == slurp(d8 / name);

    // and a second identical single-threaded run reproduces itself
    auto again = one;
    again.out_dir = (base / "run1b").string();
    const auto d1b = cli::run_cv(again);
    for (const char* name : {"report.json", "report.csv", "confusion.csv"})
        ok = ok && slurp(d1 / name) == slurp(d1b / name);

    report_line("cv-determinism", ok);
    CHECK(ok);
}
