#pragma once

#include <complex>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramanml/dataset.hpp"
#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/text.hpp"

namespace ramanml {

enum class TransformKind { Scaled, Hadamard, Fourier };

inline std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::Scaled: return "scaled";
        case TransformKind::Hadamard: return "hadamard";
        case TransformKind::Fourier: return "fourier";
    }
    return "scaled";
}

inline TransformKind transform_kind_from_string(const std::string& s) {
    if (s == "scaled" || s == "none") return TransformKind::Scaled;
    if (s == "hadamard") return TransformKind::Hadamard;
    if (s == "fourier") return TransformKind::Fourier;
    throw ConfigError("unknown transform kind: " + s);
}

// Matrix size exponent: the Hadamard matrix is 2^m x 2^m.
struct HadamardOrder {
    unsigned m = 0;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline unsigned pow2_exponent(std::size_t p) {
    unsigned m = 0;
    while ((std::size_t{1} << m) < p) ++m;
    return m;
}

// Sylvester construction: H_1 = [1], H_{2n} = [[H_n, H_n], [H_n, -H_n]].
// Kept for oracle and diagnostic use; the cap keeps the dense matrix small.
inline Matrix hadamard_matrix(HadamardOrder order) {
    if (order.m > 12) throw OrderTooLargeError("hadamard_matrix: order 2^" + std::to_string(order.m) +
                                               " exceeds the 2^12 diagnostic cap");
    const std::size_t n = std::size_t{1} << order.m;
    Matrix h(n, n);
    h(0, 0) = 1.0;
    for (std::size_t half = 1; half < n; half <<= 1) {
        for (std::size_t r = 0; r < half; ++r) {
            for (std::size_t c = 0; c < half; ++c) {
                const double v = h(r, c);
                h(r, c + half) = v;
                h(r + half, c) = v;
                h(r + half, c + half) = -v;
            }
        }
    }
    return h;
}

// Fast Walsh-Hadamard transform in natural (Sylvester) ordering. The input
// is zero-padded to the next power of two; output equals H_{2^m} * padded.
inline std::vector<double> fwht(std::span<const double> signal) {
    if (signal.empty()) throw DimensionMismatchError("fwht: empty signal");
    const std::size_t n = next_pow2(signal.size());
    std::vector<double> x(n, 0.0);
    std::copy(signal.begin(), signal.end(), x.begin());
    for (std::size_t h = 1; h < n; h <<= 1) {
        for (std::size_t i = 0; i < n; i += h << 1) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = x[j];
                const double b = x[j + h];
                x[j] = a + b;
                x[j + h] = a - b;
            }
        }
    }
    return x;
}

namespace detail {

// Mixed-radix Cooley-Tukey: radix-2 splits while the length is even, direct
// DFT on the odd remainder. Good enough for spectrum-sized inputs.
inline void fft_rec(std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    if (n <= 1) return;
    if (n % 2 == 0) {
        std::vector<std::complex<double>> even(n / 2), odd(n / 2);
        for (std::size_t i = 0; i < n / 2; ++i) {
            even[i] = x[2 * i];
            odd[i] = x[2 * i + 1];
        }
        fft_rec(even);
        fft_rec(odd);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
            const std::complex<double> w(std::cos(ang), std::sin(ang));
            x[k] = even[k] + w * odd[k];
            x[k + n / 2] = even[k] - w * odd[k];
        }
        return;
    }
    // odd length: direct evaluation
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * j % n) / static_cast<double>(n);
            acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    x = std::move(out);
}

}  // namespace detail

inline std::vector<std::complex<double>> dft(std::span<const double> signal) {
    if (signal.empty()) throw DimensionMismatchError("dft: empty signal");
    std::vector<std::complex<double>> x(signal.size());
    for (std::size_t i = 0; i < signal.size(); ++i) x[i] = {signal[i], 0.0};
    detail::fft_rec(x);
    return x;
}

// Full-length real block followed by full-length imaginary block. The
// redundant conjugate half is kept so feature index equals pseudotime index;
// half_spectrum trims both blocks to the first floor(N/2)+1 coefficients.
inline std::vector<double> fourier_features(std::span<const double> signal, bool half_spectrum = false) {
    const auto spec = dft(signal);
    const std::size_t keep = half_spectrum ? signal.size() / 2 + 1 : spec.size();
    std::vector<double> out(2 * keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out[i] = spec[i].real();
        out[i + keep] = spec[i].imag();
    }
    return out;
}

// ---------------------------------------------------------------------------
// FeatureMatrix

struct FeatureMatrix {
    Matrix values;
    TransformKind kind = TransformKind::Scaled;
    std::vector<double> feature_axis;  // wavenumbers for Scaled, pseudotime indices otherwise
    std::vector<int> labels;
    std::size_t original_length = 0;
    std::size_t padded_length = 0;  // Hadamard only
    bool normalized = false;        // per-spectrum pre-normalization applied

    void validate() const {
        if (!values.all_finite()) throw DomainError("feature matrix: non-finite entry");
        if (labels.size() != values.rows()) throw DimensionMismatchError("feature matrix: label count");
        if (feature_axis.size() != values.cols()) throw DimensionMismatchError("feature matrix: axis length");
    }
};

struct TransformOptions {
    bool pre_normalize = true;   // min-max per spectrum before transforming
    bool unit_norm = false;      // use L2 normalization instead of min-max
    bool fourier_half = false;   // keep only the non-redundant DFT half
};

inline std::vector<double> maybe_normalized_row(const LabeledDataset& ds, std::size_t row,
                                                const TransformOptions& opts) {
    if (!opts.pre_normalize) return ds.intensities.row_copy(row);
    return opts.unit_norm ? unit_normalize(ds.intensities.row(row))
                          : minmax_normalize(ds.intensities.row(row));
}

// Row-local part of a treatment: per-spectrum normalization plus the
// frequency-domain transform. Column scaling is separate so that
// cross-validation can fit it on training folds only.
inline FeatureMatrix transform_rows(const LabeledDataset& ds, TransformKind kind,
                                    const TransformOptions& opts = {}) {
    if (ds.size() == 0) throw EmptyDatasetError("transform_dataset: empty dataset");
    FeatureMatrix fm;
    fm.kind = kind;
    fm.labels = ds.labels;
    fm.original_length = ds.grid.size();
    fm.normalized = opts.pre_normalize;

    switch (kind) {
        case TransformKind::Scaled: {
            fm.values = Matrix(ds.size(), ds.grid.size());
            for (std::size_t r = 0; r < ds.size(); ++r)
                fm.values.set_row(r, maybe_normalized_row(ds, r, opts));
            fm.feature_axis = ds.grid;
            break;
        }
        case TransformKind::Hadamard: {
            const std::size_t padded = next_pow2(ds.grid.size());
            fm.padded_length = padded;
            fm.values = Matrix(ds.size(), padded);
            for (std::size_t r = 0; r < ds.size(); ++r)
                fm.values.set_row(r, fwht(maybe_normalized_row(ds, r, opts)));
            fm.feature_axis.resize(padded);
            for (std::size_t i = 0; i < padded; ++i) fm.feature_axis[i] = static_cast<double>(i);
            break;
        }
        case TransformKind::Fourier: {
            const std::size_t n = ds.grid.size();
            const std::size_t keep = opts.fourier_half ? n / 2 + 1 : n;
            fm.values = Matrix(ds.size(), 2 * keep);
            for (std::size_t r = 0; r < ds.size(); ++r)
                fm.values.set_row(r, fourier_features(maybe_normalized_row(ds, r, opts), opts.fourier_half));
            fm.feature_axis.resize(2 * keep);
            for (std::size_t i = 0; i < 2 * keep; ++i) fm.feature_axis[i] = static_cast<double>(i);
            break;
        }
    }
    fm.validate();
    return fm;
}

// Full treatment of a whole dataset. Scaled kind z-scores its columns here;
// use transform_rows + fold-local scaling inside cross-validation.
inline FeatureMatrix transform_dataset(const LabeledDataset& ds, TransformKind kind,
                                       const TransformOptions& opts = {}) {
    FeatureMatrix fm = transform_rows(ds, kind, opts);
    if (kind == TransformKind::Scaled) {
        auto [scaled, params] = zscore_scale(fm.values);
        fm.values = std::move(scaled);
    }
    return fm;
}

// ---------------------------------------------------------------------------
// Export: CSV plus a JSON sidecar carrying what is needed to reproduce the run.

inline void save_feature_matrix(const FeatureMatrix& fm, const std::string& csv_path,
                                const std::string& meta_path) {
    std::ofstream out(csv_path);
    if (!out) throw FileError("cannot write " + csv_path);
    for (std::size_t c = 0; c < fm.feature_axis.size(); ++c)
        out << (c ? "," : "") << format_full(fm.feature_axis[c]);
    out << "\n";
    for (std::size_t r = 0; r < fm.values.rows(); ++r) {
        for (std::size_t c = 0; c < fm.values.cols(); ++c)
            out << (c ? "," : "") << format_full(fm.values(r, c));
        out << "\n";
    }
    nlohmann::json j;
    j["kind"] = to_string(fm.kind);
    j["original_length"] = fm.original_length;
    j["padded_length"] = fm.padded_length;
    j["normalized"] = fm.normalized;
    j["labels"] = fm.labels;
    std::ofstream meta(meta_path);
    if (!meta) throw FileError("cannot write " + meta_path);
    meta << j.dump(2) << "\n";
}

}  // namespace ramanml
