#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramanml/dataset.hpp"
#include "ramanml/errors.hpp"
#include "ramanml/peaks.hpp"
#include "ramanml/text.hpp"

namespace ramanml {

// |1 / ln(I)| with the continuous limit 0 at I = 0. I = 1 is singular and is
// clamped just below 1 (unreachable in practice: importances sum to 1 over
// thousands of features).
inline double modified_importance(double raw) {
    if (!(raw >= 0.0 && raw <= 1.0))
        throw DomainError("modified_importance: raw importance must lie in [0,1]");
    if (raw == 0.0) return 0.0;
    const double clamped = std::min(raw, 1.0 - 1e-12);
    return std::abs(1.0 / std::log(clamped));
}

// Mean over a window of +-half_window indices, truncated at the edges.
inline std::vector<double> rolling_average(std::span<const double> values, std::size_t half_window = 2) {
    if (values.empty()) throw LengthMismatchError("rolling_average: empty input");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t lo = i >= half_window ? i - half_window : 0;
        const std::size_t hi = std::min(values.size() - 1, i + half_window);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += values[j];
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

struct ImportanceProfile {
    std::vector<double> wavenumbers;
    std::vector<double> raw;       // per-wavenumber impurity importance, sums to 1
    std::vector<double> modified;  // I_m
    std::vector<double> smoothed;  // rolling average of I_m

    static ImportanceProfile from_raw(std::span<const double> wavenumbers,
                                      std::span<const double> raw, std::size_t half_window = 2) {
        if (wavenumbers.size() != raw.size())
            throw LengthMismatchError("importance profile: axis/importance length mismatch");
        ImportanceProfile p;
        p.wavenumbers.assign(wavenumbers.begin(), wavenumbers.end());
        p.raw.assign(raw.begin(), raw.end());
        p.modified.resize(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) p.modified[i] = modified_importance(raw[i]);
        p.smoothed = rolling_average(p.modified, half_window);
        return p;
    }

    double smoothed_at(double wavenumber) const {
        // nearest grid node
        std::size_t best = 0;
        for (std::size_t i = 1; i < wavenumbers.size(); ++i)
            if (std::abs(wavenumbers[i] - wavenumber) < std::abs(wavenumbers[best] - wavenumber))
                best = i;
        return smoothed[best];
    }
};

// ---------------------------------------------------------------------------
// Reference tables and peak matching

struct ReferencePeak {
    double wavenumber = 0.0;
    std::string assignment;
};

inline std::vector<ReferencePeak> read_reference_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open reference table " + path);
    std::vector<ReferencePeak> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto fields = split(t, ',');
        const auto w = parse_double(fields[0]);
        if (!w) {
            if (first) {
                first = false;
                continue;
            }
            throw FileError(path + ": unparseable wavenumber '" + std::string(fields[0]) + "'");
        }
        first = false;
        rows.push_back({*w, fields.size() > 1 ? std::string(trim(fields[1])) : std::string{}});
    }
    return rows;
}

enum class PeakStatus { MatchedImportant, PresentIgnored, AbsentInData, ModelOnlyUnidentified };

inline std::string to_string(PeakStatus s) {
    switch (s) {
        case PeakStatus::MatchedImportant: return "matched_important";
        case PeakStatus::PresentIgnored: return "present_ignored";
        case PeakStatus::AbsentInData: return "absent_in_data";
        case PeakStatus::ModelOnlyUnidentified: return "model_only_unidentified";
    }
    return "absent_in_data";
}

struct PeakMatch {
    PeakStatus status;
    std::optional<double> model_wavenumber;      // detected data peak
    std::optional<double> reference_wavenumber;  // literature row
    std::optional<double> shift;                 // |model - reference|
    std::string assignment;
    std::optional<double> raw_importance;
    std::optional<double> smoothed_modified;
};

struct PeakMatchReport {
    std::vector<PeakMatch> rows;
    double shift_tolerance = 20.0;
    double importance_threshold = 0.13;
};

struct PeakMatchConfig {
    double shift_tolerance = 20.0;       // cm^-1, typical SERS shift scale
    double importance_threshold = 0.13;  // smoothed I_m at or above counts as used by the model
};

// Assign each reference row and each model-important data peak exactly one
// status. Data peaks are representative detected-peak positions (one entry
// per distinct peak).
inline PeakMatchReport match_peaks(const ImportanceProfile& profile,
                                   std::span<const double> data_peaks,
                                   const std::vector<ReferencePeak>& reference,
                                   const PeakMatchConfig& cfg = {}) {
    PeakMatchReport report;
    report.shift_tolerance = cfg.shift_tolerance;
    report.importance_threshold = cfg.importance_threshold;

    const auto nearest_peak = [&](double w) -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < data_peaks.size(); ++i) {
            const double d = std::abs(data_peaks[i] - w);
            if (d <= cfg.shift_tolerance && (!best || d < std::abs(data_peaks[*best] - w))) best = i;
        }
        return best;
    };

    const auto raw_at = [&](double w) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < profile.wavenumbers.size(); ++i)
            if (std::abs(profile.wavenumbers[i] - w) < std::abs(profile.wavenumbers[best] - w)) best = i;
        return profile.raw[best];
    };

    std::vector<bool> peak_claimed(data_peaks.size(), false);
    for (const auto& ref : reference) {
        PeakMatch row;
        row.reference_wavenumber = ref.wavenumber;
        row.assignment = ref.assignment;
        const auto hit = nearest_peak(ref.wavenumber);
        if (!hit) {
            row.status = PeakStatus::AbsentInData;
        } else {
            peak_claimed[*hit] = true;
            const double w = data_peaks[*hit];
            row.model_wavenumber = w;
            row.shift = std::abs(w - ref.wavenumber);
            row.raw_importance = raw_at(w);
            row.smoothed_modified = profile.smoothed_at(w);
            row.status = *row.smoothed_modified >= cfg.importance_threshold
                             ? PeakStatus::MatchedImportant
                             : PeakStatus::PresentIgnored;
        }
        report.rows.push_back(std::move(row));
    }

    for (std::size_t i = 0; i < data_peaks.size(); ++i) {
        if (peak_claimed[i]) continue;
        const double w = data_peaks[i];
        const double im = profile.smoothed_at(w);
        if (im < cfg.importance_threshold) continue;  // not model-important
        PeakMatch row;
        row.status = PeakStatus::ModelOnlyUnidentified;
        row.model_wavenumber = w;
        row.raw_importance = raw_at(w);
        row.smoothed_modified = im;
        report.rows.push_back(std::move(row));
    }
    return report;
}

// Representative data-peak positions for reporting: peaks of each class's
// min-max-normalized mean spectrum, merged across classes within a window.
inline std::vector<double> representative_peaks(const LabeledDataset& ds, double merge_window = 5.0,
                                                const PeakDetectionConfig& cfg = {}) {
    std::vector<double> positions;
    for (std::size_t cls = 0; cls < ds.n_classes(); ++cls) {
        std::vector<double> mean_spec(ds.grid.size(), 0.0);
        std::size_t n = 0;
        for (std::size_t r = 0; r < ds.size(); ++r) {
            if (ds.labels[r] != static_cast<int>(cls)) continue;
            std::vector<double> norm;
            try {
                norm = minmax_normalize(ds.intensities.row(r));
            } catch (const DegenerateSpectrumError&) {
                continue;
            }
            for (std::size_t g = 0; g < mean_spec.size(); ++g) mean_spec[g] += norm[g];
            ++n;
        }
        if (n == 0) continue;
        for (double& v : mean_spec) v /= static_cast<double>(n);
        for (const auto& p : detect_peaks(ds.grid, mean_spec, cfg).peaks)
            positions.push_back(p.wavenumber);
    }
    std::sort(positions.begin(), positions.end());
    std::vector<double> merged;
    for (double w : positions)
        if (merged.empty() || w - merged.back() > merge_window) merged.push_back(w);
    return merged;
}

// ---------------------------------------------------------------------------
// Exports

inline void save_importance_profile(const ImportanceProfile& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path);
    out << "wavenumber,raw_importance,modified_importance,smoothed_modified\n";
    for (std::size_t i = 0; i < p.wavenumbers.size(); ++i)
        out << format_full(p.wavenumbers[i]) << ',' << format_full(p.raw[i]) << ','
            << format_full(p.modified[i]) << ',' << format_full(p.smoothed[i]) << "\n";
}

inline nlohmann::json peak_match_report_to_json(const PeakMatchReport& report) {
    nlohmann::json j;
    j["shift_tolerance"] = report.shift_tolerance;
    j["importance_threshold"] = report.importance_threshold;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row;
        row["status"] = to_string(r.status);
        if (r.model_wavenumber) row["model_wavenumber"] = *r.model_wavenumber;
        if (r.reference_wavenumber) row["reference_wavenumber"] = *r.reference_wavenumber;
        if (r.shift) row["shift"] = *r.shift;
        if (!r.assignment.empty()) row["assignment"] = r.assignment;
        if (r.raw_importance) row["raw_importance"] = *r.raw_importance;
        if (r.smoothed_modified) row["smoothed_modified"] = *r.smoothed_modified;
        j["rows"].push_back(std::move(row));
    }
    return j;
}

inline void save_peak_match_csv(const PeakMatchReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path);
    out << "status,model_wavenumber,reference_wavenumber,shift,assignment,raw_importance,"
           "smoothed_modified\n";
    const auto opt = [](const std::optional<double>& v) {
        return v ? format_full(*v) : std::string{};
    };
    for (const auto& r : report.rows)
        out << to_string(r.status) << ',' << opt(r.model_wavenumber) << ','
            << opt(r.reference_wavenumber) << ',' << opt(r.shift) << ',' << r.assignment << ','
            << opt(r.raw_importance) << ',' << opt(r.smoothed_modified) << "\n";
}

// Plot-ready table: wavenumber, per-class normalized mean spectrum, smoothed I_m.
inline void save_profile_plot_csv(const LabeledDataset& ds, const ImportanceProfile& profile,
                                  const std::string& path) {
    if (profile.wavenumbers.size() != ds.grid.size())
        throw LengthMismatchError("plot export: profile length != grid length");
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path);
    out << "wavenumber";
    for (const auto& c : ds.classes) out << ",mean_" << c.label;
    out << ",smoothed_modified_importance\n";

    Matrix means(ds.n_classes(), ds.grid.size());
    std::vector<std::size_t> counts(ds.n_classes(), 0);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        std::vector<double> norm;
        try {
            norm = minmax_normalize(ds.intensities.row(r));
        } catch (const DegenerateSpectrumError&) {
            continue;
        }
        const auto cls = static_cast<std::size_t>(ds.labels[r]);
        for (std::size_t g = 0; g < norm.size(); ++g) means(cls, g) += norm[g];
        counts[cls]++;
    }
    for (std::size_t cls = 0; cls < ds.n_classes(); ++cls)
        if (counts[cls] > 0)
            for (std::size_t g = 0; g < ds.grid.size(); ++g)
                means(cls, g) /= static_cast<double>(counts[cls]);

    for (std::size_t g = 0; g < ds.grid.size(); ++g) {
        out << format_full(ds.grid[g]);
        for (std::size_t cls = 0; cls < ds.n_classes(); ++cls) out << ',' << format_full(means(cls, g));
        out << ',' << format_full(profile.smoothed[g]) << "\n";
    }
}

}  // namespace ramanml
