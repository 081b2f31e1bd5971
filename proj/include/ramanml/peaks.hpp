#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ramanml/dataset.hpp"
#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"

namespace ramanml {

struct Peak {
    std::size_t index = 0;
    double wavenumber = 0.0;
    double intensity = 0.0;    // original (unsmoothed) intensity
    bool is_significant = false;
    bool flip_eligible = false;
};

// Peaks of one spectrum. Significance and flip eligibility are measured on
// intensities above the spectrum minimum, which keeps both flags invariant
// under positive affine rescaling of the trace.
struct PeakSet {
    std::vector<Peak> peaks;
    double significance_fraction = 0.8;
    double flip_fraction = 0.2;
    double spectrum_min = 0.0;

    std::size_t significant_count() const {
        std::size_t n = 0;
        for (const auto& p : peaks) n += p.is_significant ? 1 : 0;
        return n;
    }
};

struct PeakDetectionConfig {
    double significance_fraction = 0.8;  // >= 0.8 * largest peak
    double flip_fraction = 0.2;          // <= 0.2 * largest peak
};

// Strict local maxima of the 3-point moving-average smoothed trace. The
// smoothing is used for detection only; reported intensities are original.
// Plateaus report their leftmost point.
inline PeakSet detect_peaks(std::span<const double> wavenumbers, std::span<const double> intensities,
                            const PeakDetectionConfig& cfg = {}) {
    if (intensities.size() < 3) throw DimensionMismatchError("detect_peaks: need at least 3 samples");
    const std::size_t n = intensities.size();

    std::vector<double> smooth(n);
    smooth[0] = (intensities[0] + intensities[1]) / 2.0;
    smooth[n - 1] = (intensities[n - 2] + intensities[n - 1]) / 2.0;
    for (std::size_t i = 1; i + 1 < n; ++i)
        smooth[i] = (intensities[i - 1] + intensities[i] + intensities[i + 1]) / 3.0;

    PeakSet set;
    set.significance_fraction = cfg.significance_fraction;
    set.flip_fraction = cfg.flip_fraction;
    set.spectrum_min = *std::min_element(intensities.begin(), intensities.end());

    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(smooth[i] > smooth[i - 1])) continue;
        if (smooth[i] > smooth[i + 1]) {
            set.peaks.push_back({i, wavenumbers[i], intensities[i], false, false});
        } else if (smooth[i] == smooth[i + 1]) {
            // plateau: walk to its end, keep the leftmost point if it then drops
            std::size_t j = i + 1;
            while (j + 1 < n && smooth[j] == smooth[j + 1]) ++j;
            if (j + 1 < n && smooth[j] > smooth[j + 1])
                set.peaks.push_back({i, wavenumbers[i], intensities[i], false, false});
            i = j;
        }
    }

    if (!set.peaks.empty()) {
        double top = 0.0;
        for (const auto& p : set.peaks) top = std::max(top, p.intensity - set.spectrum_min);
        for (auto& p : set.peaks) {
            const double rel = p.intensity - set.spectrum_min;
            p.is_significant = rel >= cfg.significance_fraction * top;
            p.flip_eligible = rel <= cfg.flip_fraction * top;
        }
    }
    return set;
}

inline PeakSet detect_peaks(const Spectrum& s, const PeakDetectionConfig& cfg = {}) {
    return detect_peaks(s.wavenumbers, s.intensities, cfg);
}

inline std::vector<PeakSet> detect_peaks(const LabeledDataset& ds, const PeakDetectionConfig& cfg = {}) {
    std::vector<PeakSet> out;
    out.reserve(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r)
        out.push_back(detect_peaks(ds.grid, ds.intensities.row(r), cfg));
    return out;
}

// ---------------------------------------------------------------------------
// Single-occurrence peaks

struct SingleOccurrenceReport {
    double dataset_fraction = 0.0;           // pooled over all counted classes
    std::vector<double> class_fraction;      // NaN for excluded classes
    std::vector<bool> class_excluded;        // classes with < 2 spectra
    std::size_t total_significant = 0;
    std::size_t total_single = 0;
};

// A significant peak is single-occurrence when no other spectrum of the same
// class has a significant peak within the match window.
inline SingleOccurrenceReport single_occurrence_fraction(const LabeledDataset& ds,
                                                         double match_window = 5.0,
                                                         const PeakDetectionConfig& cfg = {}) {
    const auto peak_sets = detect_peaks(ds, cfg);
    SingleOccurrenceReport rep;
    rep.class_fraction.assign(ds.n_classes(), std::nan(""));
    rep.class_excluded.assign(ds.n_classes(), false);

    const auto counts = ds.class_counts();
    for (std::size_t cls = 0; cls < ds.n_classes(); ++cls) {
        if (counts[cls] < 2) {
            rep.class_excluded[cls] = true;
            continue;
        }
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < ds.size(); ++r)
            if (ds.labels[r] == static_cast<int>(cls)) rows.push_back(r);

        std::size_t significant = 0, single = 0;
        for (std::size_t a : rows) {
            for (const auto& p : peak_sets[a].peaks) {
                if (!p.is_significant) continue;
                ++significant;
                bool matched = false;
                for (std::size_t b : rows) {
                    if (b == a) continue;
                    for (const auto& q : peak_sets[b].peaks) {
                        if (q.is_significant && std::abs(q.wavenumber - p.wavenumber) <= match_window) {
                            matched = true;
                            break;
                        }
                    }
                    if (matched) break;
                }
                if (!matched) ++single;
            }
        }
        rep.total_significant += significant;
        rep.total_single += single;
        rep.class_fraction[cls] =
            significant == 0 ? 0.0 : static_cast<double>(single) / static_cast<double>(significant);
    }
    rep.dataset_fraction = rep.total_significant == 0
                               ? 0.0
                               : static_cast<double>(rep.total_single) / static_cast<double>(rep.total_significant);
    return rep;
}

// ---------------------------------------------------------------------------
// Peak-position distribution

struct PeakHistogram {
    std::vector<double> bin_start;  // cm^-1, bins of equal width
    std::vector<double> normalized; // max bin scaled to 1
    std::vector<std::size_t> counts;
};

inline PeakHistogram peak_distribution(const LabeledDataset& ds, double bin_width = 5.0,
                                       const PeakDetectionConfig& cfg = {}) {
    if (!(bin_width > 0.0)) throw ConfigError("peak_distribution: bin width must be > 0");
    const double lo = ds.grid.front();
    const double hi = ds.grid.back();
    const std::size_t n_bins = static_cast<std::size_t>(std::floor((hi - lo) / bin_width)) + 1;

    PeakHistogram h;
    h.bin_start.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) h.bin_start[b] = lo + static_cast<double>(b) * bin_width;
    h.counts.assign(n_bins, 0);

    for (const auto& set : detect_peaks(ds, cfg))
        for (const auto& p : set.peaks) {
            auto b = static_cast<std::size_t>((p.wavenumber - lo) / bin_width);
            if (b >= n_bins) b = n_bins - 1;
            h.counts[b]++;
        }

    const auto max_count = *std::max_element(h.counts.begin(), h.counts.end());
    h.normalized.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b)
        h.normalized[b] = max_count == 0 ? 0.0 : static_cast<double>(h.counts[b]) / static_cast<double>(max_count);
    return h;
}

// Total-variation distance between two histograms after normalizing each to
// unit mass. Used to compare peak distributions before/after augmentation.
inline double total_variation_distance(const PeakHistogram& a, const PeakHistogram& b) {
    if (a.counts.size() != b.counts.size())
        throw LengthMismatchError("total_variation_distance: bin count mismatch");
    double mass_a = 0.0, mass_b = 0.0;
    for (auto c : a.counts) mass_a += static_cast<double>(c);
    for (auto c : b.counts) mass_b += static_cast<double>(c);
    if (mass_a == 0.0 || mass_b == 0.0) return mass_a == mass_b ? 0.0 : 1.0;
    double tv = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i)
        tv += std::abs(static_cast<double>(a.counts[i]) / mass_a - static_cast<double>(b.counts[i]) / mass_b);
    return tv / 2.0;
}

// ---------------------------------------------------------------------------
// Spearman correlation

struct CorrelationMatrix {
    Matrix values;  // symmetric, diagonal 1
    double average = 0.0;  // mean of off-diagonal upper triangle
};

namespace detail {

// midranks (average rank for ties), 1-based
inline std::vector<double> midranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;  // constant rank vector
    return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

// Spearman rank correlation between every pair of wavenumber columns,
// computed across spectra. Constant columns correlate as 0 off-diagonal.
inline CorrelationMatrix spearman_matrix(const LabeledDataset& ds) {
    if (ds.size() < 3) throw ConfigError("spearman_matrix: need at least 3 spectra");
    const std::size_t w = ds.grid.size();
    const std::size_t n = ds.size();

    std::vector<std::vector<double>> ranks(w);
    std::vector<double> column(n);
    for (std::size_t c = 0; c < w; ++c) {
        for (std::size_t r = 0; r < n; ++r) column[r] = ds.intensities(r, c);
        ranks[c] = detail::midranks(column);
    }

    CorrelationMatrix out;
    out.values = Matrix(w, w);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < w; ++i) {
        out.values(i, i) = 1.0;
        for (std::size_t j = i + 1; j < w; ++j) {
            const double rho = detail::pearson(ranks[i], ranks[j]);
            out.values(i, j) = rho;
            out.values(j, i) = rho;
            sum += rho;
            ++pairs;
        }
    }
    out.average = pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
    return out;
}

}  // namespace ramanml
