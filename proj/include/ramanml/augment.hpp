#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ramanml/dataset.hpp"
#include "ramanml/errors.hpp"
#include "ramanml/peaks.hpp"
#include "ramanml/rng.hpp"

namespace ramanml {

enum class FlipGate { Auto, Always, Never };  // Auto: enabled when single-occurrence fraction > 0.5

struct AugmentationConfig {
    double offset_fraction = 0.1;   // of the offset spread O-bar
    double stretch_fraction = 0.1;  // of the amplitude-variation spread S-bar
    int flip_count_min = 0;
    int flip_count_max = 5;
    double lognormal_mu = 0.0;
    double lognormal_sigma = 2.0;
    std::size_t multiplier = 10;    // output copies per original, originals included
    std::uint64_t seed = 0;
    FlipGate flip_gate = FlipGate::Auto;
    double flip_gate_threshold = 0.5;
    PeakDetectionConfig peak_config{};
    double match_window = 5.0;

    void validate() const {
        if (!(offset_fraction > 0.0 && offset_fraction <= 1.0))
            throw ConfigError("augment: offset_fraction must be in (0,1]");
        if (!(stretch_fraction > 0.0 && stretch_fraction <= 1.0))
            throw ConfigError("augment: stretch_fraction must be in (0,1]");
        if (flip_count_min < 0 || flip_count_max > 5 || flip_count_min > flip_count_max)
            throw ConfigError("augment: flip count range must lie within [0,5]");
        if (multiplier < 1) throw ConfigError("augment: multiplier must be >= 1");
    }
};

// Spread statistics measured on the training partition. Offset spread only
// exists when the partition contains baseline-uncorrected spectra.
struct AugmentationDiagnostics {
    std::optional<double> offset_std;     // O-bar
    double stretch_std = 0.0;             // S-bar
    double single_occurrence = 0.0;
    bool flips_enabled = false;
};

// O-bar: standard deviation over spectra of the minimum intensity. Absent
// when every spectrum is baseline corrected.
inline std::optional<double> estimate_offset_std(const LabeledDataset& ds) {
    if (ds.size() == 0) throw EmptyDatasetError("estimate_offset_std: empty dataset");
    bool any_uncorrected = false;
    for (const auto& m : ds.meta) any_uncorrected |= !m.baseline_corrected;
    if (!any_uncorrected) return std::nullopt;
    std::vector<double> mins(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto row = ds.intensities.row(r);
        mins[r] = *std::min_element(row.begin(), row.end());
    }
    return population_std(mins);
}

// S-bar: standard deviation over spectra of (max - min) / min. Spectra whose
// minimum is not strictly positive cannot enter the ratio and are skipped.
inline double estimate_stretch_std(const LabeledDataset& ds) {
    std::vector<double> ratios;
    ratios.reserve(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto row = ds.intensities.row(r);
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        if (*lo > 0.0) ratios.push_back((*hi - *lo) / *lo);
    }
    if (ratios.empty()) return 0.0;
    return population_std(ratios);
}

inline AugmentationDiagnostics compute_diagnostics(const LabeledDataset& train,
                                                   const AugmentationConfig& cfg) {
    AugmentationDiagnostics d;
    d.offset_std = estimate_offset_std(train);
    d.stretch_std = estimate_stretch_std(train);
    d.single_occurrence = single_occurrence_fraction(train, cfg.match_window, cfg.peak_config).dataset_fraction;
    switch (cfg.flip_gate) {
        case FlipGate::Always: d.flips_enabled = true; break;
        case FlipGate::Never: d.flips_enabled = false; break;
        case FlipGate::Auto: d.flips_enabled = d.single_occurrence > cfg.flip_gate_threshold; break;
    }
    return d;
}

// One augmented copy: offset shift (when the dataset carries offsets), whole-
// spectrum stretch, and 0-5 low peaks multiplied by a LogNormal(mu,sigma)+1
// factor when the flip gate is open. Class label and grid are untouched.
inline Spectrum augment_spectrum(const Spectrum& source, const AugmentationDiagnostics& diag,
                                 const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    Spectrum out = source;
    out.baseline_corrected = source.baseline_corrected;

    // offset: magnitude uniform in [0, f*O-bar], sign symmetric
    if (diag.offset_std.has_value()) {
        const double mag = rng.uniform(0.0, cfg.offset_fraction * *diag.offset_std);
        const double delta = rng.coin() ? mag : -mag;
        for (double& y : out.intensities) y += delta;
    }

    // stretch: factor 1 + dS, dS uniform in [-f*S-bar, f*S-bar], half-width kept < 1
    {
        const double half = std::min(cfg.stretch_fraction * diag.stretch_std, 1.0 - 1e-12);
        const double ds = rng.uniform(-half, half);
        for (double& y : out.intensities) y *= (1.0 + ds);
    }

    // flip: raise randomly chosen flip-eligible peaks
    if (diag.flips_enabled) {
        const auto set = detect_peaks(out, cfg.peak_config);
        std::vector<std::size_t> eligible;
        for (const auto& p : set.peaks)
            if (p.flip_eligible) eligible.push_back(p.index);
        const int want = static_cast<int>(rng.uniform_int(cfg.flip_count_min, cfg.flip_count_max));
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(want), eligible.size());
        rng.shuffle(eligible);
        for (std::size_t i = 0; i < k; ++i) {
            const double factor = rng.lognormal(cfg.lognormal_mu, cfg.lognormal_sigma) + 1.0;
            out.intensities[eligible[i]] *= factor;
        }
    }

    for (double y : out.intensities)
        if (!std::isfinite(y)) throw NumericalDivergenceError("augment: non-finite intensity");
    return out;
}

// Originals plus (multiplier-1) augmented copies of each, so per-class counts
// scale exactly. Copy i of original r uses the RNG stream r*(multiplier-1)+i,
// making the result independent of evaluation order.
inline LabeledDataset augment_dataset(const LabeledDataset& train, const AugmentationConfig& cfg) {
    cfg.validate();
    if (train.size() == 0) throw EmptyDatasetError("augment_dataset: empty partition");
    const auto diag = compute_diagnostics(train, cfg);

    LabeledDataset out;
    out.chemical = train.chemical;
    out.grid = train.grid;
    out.classes = train.classes;
    const std::size_t copies = cfg.multiplier - 1;
    const std::size_t total = train.size() * cfg.multiplier;
    out.intensities = Matrix(total, train.grid.size());
    out.labels.resize(total);
    out.meta.resize(total);

    for (std::size_t r = 0; r < train.size(); ++r) {
        out.intensities.set_row(r, train.intensities.row(r));
        out.labels[r] = train.labels[r];
        out.meta[r] = train.meta[r];
    }
    for (std::size_t r = 0; r < train.size(); ++r) {
        const Spectrum source = train.spectrum(r);
        for (std::size_t i = 0; i < copies; ++i) {
            Rng rng(cfg.seed, static_cast<std::uint64_t>(r) * copies + i);
            const Spectrum aug = augment_spectrum(source, diag, cfg, rng);
            const std::size_t row = train.size() + r * copies + i;
            out.intensities.set_row(row, aug.intensities);
            out.labels[row] = train.labels[r];
            out.meta[row] = train.meta[r];
            out.meta[row].augmented = true;
        }
    }
    out.validate();
    return out;
}

}  // namespace ramanml
