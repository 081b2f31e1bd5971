#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/rng.hpp"
#include "ramanml/text.hpp"

namespace ramanml {

enum class SourceMethod { EvaporatingOuzo, SilverNanoparticles, Synthetic };

inline std::string to_string(SourceMethod m) {
    switch (m) {
        case SourceMethod::EvaporatingOuzo: return "evaporating_ouzo";
        case SourceMethod::SilverNanoparticles: return "silver_nanoparticles";
        case SourceMethod::Synthetic: return "synthetic";
    }
    return "synthetic";
}

inline SourceMethod source_method_from_string(const std::string& s) {
    if (s == "evaporating_ouzo") return SourceMethod::EvaporatingOuzo;
    if (s == "silver_nanoparticles") return SourceMethod::SilverNanoparticles;
    if (s == "synthetic") return SourceMethod::Synthetic;
    throw ConfigError("unknown source_method: " + s);
}

// One recorded Raman trace: wavenumber grid, intensities, provenance.
struct Spectrum {
    std::vector<double> wavenumbers;  // cm^-1, strictly increasing
    std::vector<double> intensities;  // arbitrary units
    std::string chemical;
    double concentration = 0.0;  // mol/L, > 0
    SourceMethod source_method = SourceMethod::Synthetic;
    bool baseline_corrected = true;

    void validate() const {
        if (wavenumbers.size() != intensities.size())
            throw DimensionMismatchError("spectrum: wavenumber/intensity length mismatch");
        if (wavenumbers.empty()) throw DimensionMismatchError("spectrum: empty");
        for (std::size_t i = 0; i < wavenumbers.size(); ++i) {
            if (!std::isfinite(wavenumbers[i]) || !std::isfinite(intensities[i]))
                throw DomainError("spectrum: non-finite value");
            if (i > 0 && wavenumbers[i] <= wavenumbers[i - 1])
                throw GridError("spectrum: wavenumbers not strictly increasing");
        }
        if (!(concentration > 0.0)) throw DomainError("spectrum: concentration must be > 0");
    }
};

struct SampleMeta {
    SourceMethod source_method = SourceMethod::Synthetic;
    bool baseline_corrected = true;
    bool augmented = false;
};

struct ClassInfo {
    double concentration = 0.0;
    std::string label;
};

// Spectra on one shared grid with concentration-class labels.
struct LabeledDataset {
    std::string chemical;
    std::vector<double> grid;
    Matrix intensities;            // rows = samples, cols = grid points
    std::vector<int> labels;       // class index per row
    std::vector<ClassInfo> classes;  // sorted descending by concentration
    std::vector<SampleMeta> meta;

    std::size_t size() const { return intensities.rows(); }
    std::size_t n_classes() const { return classes.size(); }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(classes.size(), 0);
        for (int l : labels) counts[static_cast<std::size_t>(l)]++;
        return counts;
    }

    void validate() const {
        if (intensities.rows() != labels.size() || labels.size() != meta.size())
            throw DimensionMismatchError("dataset: row/label/meta count mismatch");
        if (intensities.cols() != grid.size())
            throw DimensionMismatchError("dataset: grid length mismatch");
        if (!intensities.all_finite()) throw DomainError("dataset: non-finite intensity");
        const auto counts = class_counts();
        for (int l : labels)
            if (l < 0 || static_cast<std::size_t>(l) >= classes.size())
                throw DomainError("dataset: class index out of range");
        for (std::size_t c = 0; c < counts.size(); ++c)
            if (counts[c] == 0) throw EmptyDatasetError("dataset: class without samples");
        for (std::size_t c = 1; c < classes.size(); ++c)
            if (classes[c].concentration >= classes[c - 1].concentration)
                throw DomainError("dataset: classes not sorted descending");
    }

    LabeledDataset take(const std::vector<std::size_t>& idx) const {
        LabeledDataset out;
        out.chemical = chemical;
        out.grid = grid;
        out.classes = classes;
        out.intensities = intensities.take_rows(idx);
        out.labels.reserve(idx.size());
        out.meta.reserve(idx.size());
        for (auto i : idx) {
            out.labels.push_back(labels[i]);
            out.meta.push_back(meta[i]);
        }
        return out;
    }

    Spectrum spectrum(std::size_t row) const {
        Spectrum s;
        s.wavenumbers = grid;
        s.intensities = intensities.row_copy(row);
        s.chemical = chemical;
        s.concentration = classes[static_cast<std::size_t>(labels[row])].concentration;
        s.source_method = meta[row].source_method;
        s.baseline_corrected = meta[row].baseline_corrected;
        return s;
    }
};

struct ManifestEntry {
    std::string path;
    std::string chemical;
    double concentration = 0.0;
    SourceMethod source_method = SourceMethod::Synthetic;
    bool baseline_corrected = true;
};

// Ingestion recipe: files, target grid, truncation window, drop threshold.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    double grid_spacing = 0.0;       // cm^-1
    double min_wavenumber = 0.0;
    double max_wavenumber = 0.0;
    std::size_t min_spectra_per_class = 4;

    void validate() const {
        if (!(grid_spacing > 0.0)) throw ConfigError("manifest: spacing must be > 0");
        if (!(min_wavenumber < max_wavenumber))
            throw ConfigError("manifest: min_wavenumber must be < max_wavenumber");
        for (const auto& e : entries)
            if (e.path.empty()) throw ConfigError("manifest: empty path");
    }

    std::vector<double> build_grid() const {
        std::vector<double> g;
        const auto n = static_cast<std::size_t>(
                           std::floor((max_wavenumber - min_wavenumber) / grid_spacing + 1e-9)) + 1;
        g.reserve(n);
        for (std::size_t i = 0; i < n; ++i) g.push_back(min_wavenumber + static_cast<double>(i) * grid_spacing);
        return g;
    }
};

// ---------------------------------------------------------------------------
// CSV input

// Two-column CSV (wavenumber, intensity). First row is treated as a header
// when its first field does not parse as a number.
inline Spectrum read_spectrum_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path);
    Spectrum s;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto fields = split(t, ',');
        if (fields.size() < 2)
            throw FileError(path + ":" + std::to_string(lineno) + ": expected two columns");
        const auto w = parse_double(fields[0]);
        const auto y = parse_double(fields[1]);
        if (!w || !y) {
            if (first) {
                first = false;  // header row
                continue;
            }
            throw FileError(path + ":" + std::to_string(lineno) + ": unparseable row");
        }
        first = false;
        s.wavenumbers.push_back(*w);
        s.intensities.push_back(*y);
    }
    if (s.wavenumbers.empty()) throw FileError(path + ": no data rows");
    return s;
}

// ---------------------------------------------------------------------------
// Core operations

// Linear interpolation onto a new grid. No extrapolation: the target grid
// must lie inside the spectrum's range.
inline Spectrum resample(const Spectrum& s, std::span<const double> grid) {
    s.validate();
    if (grid.empty()) throw GridError("resample: empty grid");
    if (grid.front() < s.wavenumbers.front() - 1e-9 || grid.back() > s.wavenumbers.back() + 1e-9)
        throw GridError("resample: grid [" + format_full(grid.front()) + ", " + format_full(grid.back()) +
                        "] exceeds spectrum range [" + format_full(s.wavenumbers.front()) + ", " +
                        format_full(s.wavenumbers.back()) + "]");
    Spectrum out;
    out.wavenumbers.assign(grid.begin(), grid.end());
    out.intensities.resize(grid.size());
    out.chemical = s.chemical;
    out.concentration = s.concentration;
    out.source_method = s.source_method;
    out.baseline_corrected = s.baseline_corrected;

    std::size_t j = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = std::clamp(grid[i], s.wavenumbers.front(), s.wavenumbers.back());
        while (j + 2 < s.wavenumbers.size() && s.wavenumbers[j + 1] < w) ++j;
        const double w0 = s.wavenumbers[j], w1 = s.wavenumbers[j + 1];
        // exact node hits copy through bit-exactly
        if (w == w0) {
            out.intensities[i] = s.intensities[j];
        } else if (w == w1) {
            out.intensities[i] = s.intensities[j + 1];
        } else {
            const double t = (w - w0) / (w1 - w0);
            out.intensities[i] = s.intensities[j] + t * (s.intensities[j + 1] - s.intensities[j]);
        }
    }
    return out;
}

// Map intensities to [0, 1].
inline Spectrum minmax_normalize(const Spectrum& s) {
    const auto [lo_it, hi_it] = std::minmax_element(s.intensities.begin(), s.intensities.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw DegenerateSpectrumError("minmax_normalize: constant spectrum");
    Spectrum out = s;
    for (double& y : out.intensities) y = (y - lo) / (hi - lo);
    return out;
}

inline std::vector<double> minmax_normalize(std::span<const double> y) {
    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw DegenerateSpectrumError("minmax_normalize: constant spectrum");
    std::vector<double> out(y.begin(), y.end());
    for (double& v : out) v = (v - lo) / (hi - lo);
    return out;
}

// Alternative per-sample normalization (config flag): divide by the L2 norm.
inline std::vector<double> unit_normalize(std::span<const double> y) {
    double n2 = 0.0;
    for (double v : y) n2 += v * v;
    if (!(n2 > 0.0)) throw DegenerateSpectrumError("unit_normalize: zero spectrum");
    std::vector<double> out(y.begin(), y.end());
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : out) v *= inv;
    return out;
}

// Column statistics fitted on a training matrix, reusable on held-out data.
struct ScalerParams {
    std::vector<double> means;
    std::vector<double> stds;  // sample (n-1) convention; 0 marks a constant column

    void apply(Matrix& m) const {
        if (m.cols() != means.size()) throw DimensionMismatchError("scaler: column count mismatch");
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                m(r, c) = stds[c] > 0.0 ? (m(r, c) - means[c]) / stds[c] : 0.0;
    }
};

// Column-wise z-scoring: mean 0, sample standard deviation 1. Constant
// columns map to all-zero.
inline ScalerParams fit_scaler(const Matrix& m) {
    if (m.rows() < 2) throw ConfigError("zscore_scale: need at least 2 samples");
    ScalerParams p;
    p.means.resize(m.cols());
    p.stds.resize(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, c);
        const double mu = s / static_cast<double>(m.rows());
        double ss = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double d = m(r, c) - mu;
            ss += d * d;
        }
        const double var = ss / static_cast<double>(m.rows() - 1);
        p.means[c] = mu;
        p.stds[c] = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return p;
}

inline std::pair<Matrix, ScalerParams> zscore_scale(const Matrix& m) {
    ScalerParams p = fit_scaler(m);
    Matrix out = m;
    p.apply(out);
    return {std::move(out), std::move(p)};
}

// Each distinct concentration value becomes one class, ordered descending.
inline std::vector<ClassInfo> assign_class_labels(std::span<const double> concentrations) {
    std::vector<double> distinct(concentrations.begin(), concentrations.end());
    for (double c : distinct)
        if (!(c > 0.0)) throw DomainError("assign_class_labels: concentration must be > 0");
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<ClassInfo> classes;
    classes.reserve(distinct.size());
    for (double c : distinct) classes.push_back({c, sci_label(c)});
    return classes;
}

inline int class_index_of(const std::vector<ClassInfo>& classes, double concentration) {
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i].concentration == concentration) return static_cast<int>(i);
    throw DomainError("class_index_of: unknown concentration");
}

// ---------------------------------------------------------------------------
// Manifest loading

inline DatasetManifest read_manifest_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FileError("manifest " + path + ": " + e.what());
    }
    DatasetManifest m;
    try {
        const auto& grid = j.at("grid");
        m.grid_spacing = grid.at("spacing").get<double>();
        m.min_wavenumber = grid.at("min_wavenumber").get<double>();
        m.max_wavenumber = grid.at("max_wavenumber").get<double>();
        m.min_spectra_per_class = j.value("min_spectra_per_class", std::size_t{4});
        const auto base = std::filesystem::path(path).parent_path();
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.path = (base / e.at("path").get<std::string>()).string();
            entry.chemical = e.value("chemical", std::string{});
            entry.concentration = e.at("concentration").get<double>();
            entry.source_method = source_method_from_string(
                e.value("source_method", std::string{"synthetic"}));
            entry.baseline_corrected = e.value("baseline_corrected", true);
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FileError("manifest " + path + ": " + e.what());
    }
    m.validate();
    return m;
}

// Load every referenced file, resample onto the manifest grid, drop classes
// below the minimum sample count, and label what remains.
inline LabeledDataset load_dataset(const DatasetManifest& manifest) {
    manifest.validate();
    const auto grid = manifest.build_grid();

    std::vector<Spectrum> spectra;
    spectra.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        Spectrum s = read_spectrum_csv(e.path);
        s.chemical = e.chemical;
        s.concentration = e.concentration;
        s.source_method = e.source_method;
        s.baseline_corrected = e.baseline_corrected;
        try {
            spectra.push_back(resample(s, grid));
        } catch (const GridError& err) {
            throw GridError(e.path + ": " + err.what());
        }
    }

    // count per concentration, drop below threshold
    std::map<double, std::size_t> counts;
    for (const auto& s : spectra) counts[s.concentration]++;
    std::vector<double> kept;
    for (const auto& [conc, n] : counts)
        if (n >= manifest.min_spectra_per_class) kept.push_back(conc);
    if (kept.empty()) throw EmptyDatasetError("load_dataset: no class meets the sample threshold");

    LabeledDataset ds;
    ds.grid = grid;
    ds.classes = assign_class_labels(kept);
    if (!manifest.entries.empty()) ds.chemical = manifest.entries.front().chemical;

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < spectra.size(); ++i)
        if (std::find(kept.begin(), kept.end(), spectra[i].concentration) != kept.end())
            rows.push_back(i);

    ds.intensities = Matrix(rows.size(), grid.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& s = spectra[rows[r]];
        ds.intensities.set_row(r, s.intensities);
        ds.labels.push_back(class_index_of(ds.classes, s.concentration));
        ds.meta.push_back({s.source_method, s.baseline_corrected, false});
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset export/import (CSV + JSON sidecar)

inline void save_dataset(const LabeledDataset& ds, const std::string& csv_path,
                         const std::string& meta_path) {
    std::ofstream out(csv_path);
    if (!out) throw FileError("cannot write " + csv_path);
    out << "wavenumber";
    for (std::size_t i = 0; i < ds.size(); ++i) out << ",spectrum_" << i;
    out << "\n";
    for (std::size_t g = 0; g < ds.grid.size(); ++g) {
        out << format_full(ds.grid[g]);
        for (std::size_t r = 0; r < ds.size(); ++r) out << ',' << format_full(ds.intensities(r, g));
        out << "\n";
    }

    nlohmann::json j;
    j["chemical"] = ds.chemical;
    j["classes"] = nlohmann::json::array();
    for (const auto& c : ds.classes)
        j["classes"].push_back({{"concentration", c.concentration}, {"label", c.label}});
    j["samples"] = nlohmann::json::array();
    for (std::size_t r = 0; r < ds.size(); ++r)
        j["samples"].push_back({{"class", ds.labels[r]},
                                {"source_method", to_string(ds.meta[r].source_method)},
                                {"baseline_corrected", ds.meta[r].baseline_corrected},
                                {"augmented", ds.meta[r].augmented}});
    std::ofstream meta(meta_path);
    if (!meta) throw FileError("cannot write " + meta_path);
    meta << j.dump(2) << "\n";
}

inline LabeledDataset load_saved_dataset(const std::string& csv_path, const std::string& meta_path) {
    std::ifstream in(csv_path);
    if (!in) throw FileError("cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw FileError(csv_path + ": empty");
    const std::size_t n_samples = split(trim(line), ',').size() - 1;

    std::vector<double> grid;
    std::vector<std::vector<double>> columns(n_samples);
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto fields = split(t, ',');
        if (fields.size() != n_samples + 1) throw FileError(csv_path + ": ragged row");
        grid.push_back(*parse_double(fields[0]));
        for (std::size_t i = 0; i < n_samples; ++i) columns[i].push_back(*parse_double(fields[i + 1]));
    }

    std::ifstream meta(meta_path);
    if (!meta) throw FileError("cannot open " + meta_path);
    nlohmann::json j;
    meta >> j;

    LabeledDataset ds;
    ds.chemical = j.value("chemical", std::string{});
    ds.grid = std::move(grid);
    for (const auto& c : j.at("classes"))
        ds.classes.push_back({c.at("concentration").get<double>(), c.at("label").get<std::string>()});
    ds.intensities = Matrix(n_samples, ds.grid.size());
    const auto& samples = j.at("samples");
    if (samples.size() != n_samples) throw FileError(meta_path + ": sample count mismatch");
    for (std::size_t r = 0; r < n_samples; ++r) {
        ds.intensities.set_row(r, columns[r]);
        ds.labels.push_back(samples[r].at("class").get<int>());
        ds.meta.push_back({source_method_from_string(samples[r].at("source_method").get<std::string>()),
                           samples[r].at("baseline_corrected").get<bool>(),
                           samples[r].value("augmented", false)});
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticPeak {
    double position = 0.0;       // cm^-1
    double width = 10.0;         // Lorentzian half-width gamma
    double base_amplitude = 1.0;
    double sensitivity = 1.0;    // relative amplitude gain from lowest to highest concentration
};

struct SyntheticSpec {
    double min_wavenumber = 400.0;
    double max_wavenumber = 1000.0;
    double grid_spacing = 9.5;
    std::vector<SyntheticPeak> peaks;
    std::vector<double> concentrations;
    std::size_t spectra_per_class = 10;
    double noise_level = 0.0;          // additive Gaussian sigma
    bool baseline = false;             // random linear baseline per spectrum
    double baseline_offset_mean = 20.0;
    double baseline_offset_std = 2.0;
    double baseline_slope_max = 0.01;  // intensity per cm^-1
    std::uint64_t seed = 0;
    std::string chemical = "synthetic";
};

// Deterministic test-fixture generator: Lorentzian peaks whose amplitudes
// grow monotonically with concentration, optional per-spectrum linear
// baseline, additive Gaussian noise. Identical spec -> identical dataset.
inline LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.peaks.empty()) throw ConfigError("synthetic: no peaks");
    if (spec.concentrations.empty()) throw ConfigError("synthetic: no concentrations");
    for (const auto& p : spec.peaks)
        if (p.position < spec.min_wavenumber || p.position > spec.max_wavenumber)
            throw ConfigError("synthetic: peak outside grid");

    DatasetManifest grid_only;
    grid_only.grid_spacing = spec.grid_spacing;
    grid_only.min_wavenumber = spec.min_wavenumber;
    grid_only.max_wavenumber = spec.max_wavenumber;
    const auto grid = grid_only.build_grid();

    LabeledDataset ds;
    ds.chemical = spec.chemical;
    ds.grid = grid;
    ds.classes = assign_class_labels(spec.concentrations);

    double log_lo = std::log10(ds.classes.back().concentration);
    double log_hi = std::log10(ds.classes.front().concentration);
    const bool single = !(log_hi > log_lo);

    const std::size_t n_rows = ds.classes.size() * spec.spectra_per_class;
    ds.intensities = Matrix(n_rows, grid.size());
    std::size_t row = 0;
    for (std::size_t k = 0; k < ds.classes.size(); ++k) {
        // amplitude factor in [0, 1]: 0 at the lowest concentration, 1 at the highest
        const double t = single ? 1.0
                                : (std::log10(ds.classes[k].concentration) - log_lo) / (log_hi - log_lo);
        for (std::size_t i = 0; i < spec.spectra_per_class; ++i, ++row) {
            Rng rng(spec.seed, row);
            double offset = 0.0, slope = 0.0;
            if (spec.baseline) {
                offset = rng.normal(spec.baseline_offset_mean, spec.baseline_offset_std);
                slope = rng.uniform(0.0, spec.baseline_slope_max);
            }
            for (std::size_t g = 0; g < grid.size(); ++g) {
                double y = offset + slope * (grid[g] - spec.min_wavenumber);
                for (const auto& p : spec.peaks) {
                    const double amp = p.base_amplitude * (1.0 + p.sensitivity * t);
                    const double d = grid[g] - p.position;
                    y += amp * p.width * p.width / (d * d + p.width * p.width);
                }
                if (spec.noise_level > 0.0) y += rng.normal(0.0, spec.noise_level);
                ds.intensities(row, g) = y;
            }
            ds.labels.push_back(static_cast<int>(k));
            ds.meta.push_back({SourceMethod::Synthetic, !spec.baseline, false});
        }
    }
    ds.validate();
    return ds;
}

}  // namespace ramanml
