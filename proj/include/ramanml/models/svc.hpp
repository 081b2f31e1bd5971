#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/parallel.hpp"
#include "ramanml/rng.hpp"

namespace ramanml {

enum class SvcKernel { Linear, Rbf, Polynomial };

inline std::string to_string(SvcKernel k) {
    switch (k) {
        case SvcKernel::Linear: return "linear";
        case SvcKernel::Rbf: return "rbf";
        case SvcKernel::Polynomial: return "polynomial";
    }
    return "linear";
}

struct SvcConfig {
    double c = 1.0;
    SvcKernel kernel = SvcKernel::Linear;
    int degree = 3;
    double rbf_gamma = 0.0;  // 0: auto = 1 / (n_features * variance of all feature values)
    double tolerance = 1e-3;
    int max_passes = 2000;   // hard cap on full SMO sweeps per binary problem
    std::uint64_t seed = 0;

    void validate() const {
        if (!(c > 0.0)) throw ConfigError("svc: C must be > 0");
        if (degree < 1) throw ConfigError("svc: degree must be >= 1");
        if (!(tolerance > 0.0)) throw ConfigError("svc: tolerance must be > 0");
        if (max_passes < 1) throw ConfigError("svc: max_passes must be >= 1");
    }
};

namespace detail {

struct KernelFn {
    SvcKernel kind;
    int degree;
    double gamma;

    double operator()(std::span<const double> a, std::span<const double> b) const {
        switch (kind) {
            case SvcKernel::Linear: {
                double dot = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
                return dot;
            }
            case SvcKernel::Rbf: {
                double d2 = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    const double d = a[i] - b[i];
                    d2 += d * d;
                }
                return std::exp(-gamma * d2);
            }
            case SvcKernel::Polynomial: {
                double dot = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
                return std::pow(gamma * dot + 1.0, degree);
            }
        }
        return 0.0;
    }
};

// One binary soft-margin problem trained by sequential minimal optimization.
struct BinarySvm {
    std::vector<std::size_t> support_rows;  // indices into the one-vs-one pair's row list
    std::vector<double> alpha_y;            // alpha_i * y_i for support vectors
    double bias = 0.0;
    double dual_objective = 0.0;
    int positive_class = 0;
    int negative_class = 0;
};

// Platt's SMO with the standard second-choice hierarchy: max-|E1 - E2|
// partner first, then the non-bound set, then everything, each from a seeded
// start. Converged when a full examine-all sweep changes nothing.
struct SmoSolver {
    const Matrix& k;
    const std::vector<int>& y;
    double c;
    double tol;
    std::vector<double> alpha;
    std::vector<double> err;
    double bias = 0.0;

    SmoSolver(const Matrix& kernel_matrix, const std::vector<int>& y_sign, double c_, double tol_)
        : k(kernel_matrix), y(y_sign), c(c_), tol(tol_) {
        alpha.assign(y.size(), 0.0);
        err.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) err[i] = -static_cast<double>(y[i]);
    }

    bool non_bound(std::size_t i) const { return alpha[i] > 0.0 && alpha[i] < c; }

    bool take_step(std::size_t i1, std::size_t i2) {
        if (i1 == i2) return false;
        const double a1 = alpha[i1], a2 = alpha[i2];
        const double y1 = y[i1], y2 = y[i2];
        const double e1 = err[i1], e2 = err[i2];
        const double s = y1 * y2;

        double lo, hi;
        if (y1 != y2) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(c, c + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - c);
            hi = std::min(c, a1 + a2);
        }
        if (lo >= hi) return false;

        const double k11 = k(i1, i1), k12 = k(i1, i2), k22 = k(i2, i2);
        const double eta = k11 + k22 - 2.0 * k12;

        double a2_new;
        if (eta > 0.0) {
            a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
        } else {
            // flat direction: evaluate the objective at both clip ends
            const double f1 = y1 * e1 - a1 * k11 - s * a2 * k12;
            const double f2 = y2 * e2 - s * a1 * k12 - a2 * k22;
            const double l1 = a1 + s * (a2 - lo);
            const double h1 = a1 + s * (a2 - hi);
            const double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                                  s * lo * l1 * k12;
            const double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                                  s * hi * h1 * k12;
            if (obj_lo < obj_hi - 1e-12)
                a2_new = lo;
            else if (obj_lo > obj_hi + 1e-12)
                a2_new = hi;
            else
                return false;
        }
        if (std::abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12)) return false;
        const double a1_new = a1 + s * (a2 - a2_new);

        const double b1 = bias - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12;
        const double b2 = bias - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22;
        double new_bias;
        if (a1_new > 0.0 && a1_new < c)
            new_bias = b1;
        else if (a2_new > 0.0 && a2_new < c)
            new_bias = b2;
        else
            new_bias = (b1 + b2) / 2.0;

        const double d1 = y1 * (a1_new - a1), d2 = y2 * (a2_new - a2), db = new_bias - bias;
        for (std::size_t t = 0; t < y.size(); ++t) err[t] += d1 * k(i1, t) + d2 * k(i2, t) + db;
        alpha[i1] = a1_new;
        alpha[i2] = a2_new;
        bias = new_bias;
        return true;
    }

    bool examine(std::size_t i2, Rng& rng) {
        const double y2 = y[i2], a2 = alpha[i2], e2 = err[i2];
        const double r2 = e2 * y2;
        const bool violates = (r2 < -tol && a2 < c) || (r2 > tol && a2 > 0.0);
        if (!violates) return false;

        const std::size_t n = y.size();
        // heuristic 1: maximize |e1 - e2| over the non-bound set
        std::size_t best = n;
        double best_gap = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!non_bound(i) || i == i2) continue;
            const double gap = std::abs(err[i] - e2);
            if (gap > best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        if (best < n && take_step(best, i2)) return true;

        // heuristic 2: the non-bound set from a seeded start
        const std::size_t start = static_cast<std::size_t>(rng.uniform_index(n));
        for (std::size_t off = 0; off < n; ++off) {
            const std::size_t i = (start + off) % n;
            if (non_bound(i) && take_step(i, i2)) return true;
        }
        // heuristic 3: everything from a seeded start
        const std::size_t start2 = static_cast<std::size_t>(rng.uniform_index(n));
        for (std::size_t off = 0; off < n; ++off) {
            const std::size_t i = (start2 + off) % n;
            if (take_step(i, i2)) return true;
        }
        return false;
    }

    bool solve(int max_passes, Rng& rng) {
        int changed = 0;
        bool examine_all = true;
        int passes = 0;
        while (changed > 0 || examine_all) {
            if (++passes > max_passes) return false;
            changed = 0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                if (examine_all || non_bound(i)) changed += examine(i, rng) ? 1 : 0;
            }
            if (examine_all)
                examine_all = false;
            else if (changed == 0)
                examine_all = true;
        }
        return true;
    }
};

inline bool smo_train(const Matrix& x, const std::vector<int>& y_sign, const KernelFn& kernel,
                      double c, double tol, int max_passes, Rng& rng, std::vector<double>& alpha,
                      double& bias) {
    const std::size_t n = x.rows();
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = kernel(x.row(i), x.row(j));
            k(i, j) = v;
            k(j, i) = v;
        }
    SmoSolver solver(k, y_sign, c, tol);
    const bool converged = solver.solve(max_passes, rng);
    alpha = std::move(solver.alpha);
    bias = solver.bias;
    return converged;
}

inline double dual_objective(const Matrix& x, const std::vector<int>& y_sign, const KernelFn& kernel,
                             std::span<const double> alpha) {
    const std::size_t n = x.rows();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += alpha[i];
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (alpha[j] == 0.0) continue;
            obj -= 0.5 * alpha[i] * alpha[j] * y_sign[i] * y_sign[j] * kernel(x.row(i), x.row(j));
        }
    }
    return obj;
}

}  // namespace detail

struct SvcModel {
    SvcConfig config;
    double gamma = 0.0;  // resolved value
    int n_classes = 0;
    std::vector<detail::BinarySvm> machines;  // one per unordered class pair (a < b)
    Matrix support_vectors;                   // deduplicated training rows referenced by machines
    bool converged = true;
};

// Carries the best-so-far model alongside the failure.
class SvcNonConvergence : public NonConvergenceError {
public:
    SvcNonConvergence(const std::string& msg, SvcModel m)
        : NonConvergenceError(msg), model(std::move(m)) {}
    SvcModel model;
};

inline double resolve_gamma(const SvcConfig& cfg, const Matrix& features) {
    if (cfg.rbf_gamma > 0.0) return cfg.rbf_gamma;
    double var = 0.0;
    const double mu = mean(std::span<const double>(features.data()));
    for (double v : features.data()) var += (v - mu) * (v - mu);
    var /= static_cast<double>(features.data().size());
    if (!(var > 0.0)) var = 1.0;
    return 1.0 / (static_cast<double>(features.cols()) * var);
}

// One-vs-one soft-margin SVC trained by SMO. Throws NonConvergenceError when
// any pair exhausts max_passes sweeps without a clean pass.
inline SvcModel svc_fit(const Matrix& features, const std::vector<int>& labels, const SvcConfig& config,
                        unsigned threads = 1) {
    config.validate();
    if (features.rows() != labels.size()) throw DimensionMismatchError("svc_fit: label count mismatch");
    const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    if (n_classes < 2) throw DegenerateDataError("svc_fit: need at least 2 classes");

    SvcModel model;
    model.config = config;
    model.gamma = resolve_gamma(config, features);
    model.n_classes = n_classes;

    const detail::KernelFn kernel{config.kernel, config.degree, model.gamma};

    struct Pair {
        int a, b;
    };
    std::vector<Pair> pairs;
    for (int a = 0; a < n_classes; ++a)
        for (int b = a + 1; b < n_classes; ++b) pairs.push_back({a, b});

    // gather rows per pair, train each binary machine
    std::vector<detail::BinarySvm> machines(pairs.size());
    std::vector<char> ok(pairs.size(), 1);

    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        const auto [a, b] = pairs[p];
        std::vector<std::size_t> rows;
        std::vector<int> y_sign;
        for (std::size_t r = 0; r < labels.size(); ++r) {
            if (labels[r] == a || labels[r] == b) {
                rows.push_back(r);
                y_sign.push_back(labels[r] == a ? 1 : -1);
            }
        }
        const Matrix x = features.take_rows(rows);
        std::vector<double> alpha;
        double bias = 0.0;
        Rng rng(config.seed, p);
        const bool converged =
            detail::smo_train(x, y_sign, kernel, config.c, config.tolerance, config.max_passes, rng,
                              alpha, bias);
        ok[p] = converged ? 1 : 0;

        detail::BinarySvm m;
        m.positive_class = a;
        m.negative_class = b;
        m.bias = bias;
        m.dual_objective = detail::dual_objective(x, y_sign, kernel, alpha);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (alpha[i] > 1e-12) {
                m.support_rows.push_back(rows[i]);
                m.alpha_y.push_back(alpha[i] * y_sign[i]);
            }
        }
        machines[p] = std::move(m);
    });

    // compact: keep only rows referenced as support vectors
    std::vector<std::size_t> used;
    for (const auto& m : machines)
        for (auto r : m.support_rows) used.push_back(r);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    std::vector<std::size_t> remap(features.rows(), 0);
    for (std::size_t i = 0; i < used.size(); ++i) remap[used[i]] = i;
    model.support_vectors = features.take_rows(used);
    for (auto& m : machines)
        for (auto& r : m.support_rows) r = remap[r];
    model.machines = std::move(machines);

    model.converged = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    if (!model.converged)
        throw SvcNonConvergence("svc_fit: SMO did not converge within max_passes=" +
                                    std::to_string(config.max_passes) +
                                    "; raise max_passes or loosen tolerance",
                                std::move(model));
    return model;
}

inline double svc_decision(const SvcModel& m, const detail::BinarySvm& machine,
                           std::span<const double> x) {
    const detail::KernelFn kernel{m.config.kernel, m.config.degree, m.gamma};
    double f = machine.bias;
    for (std::size_t i = 0; i < machine.support_rows.size(); ++i)
        f += machine.alpha_y[i] * kernel(m.support_vectors.row(machine.support_rows[i]), x);
    return f;
}

inline int svc_predict_one(const SvcModel& m, std::span<const double> x) {
    std::vector<int> votes(static_cast<std::size_t>(m.n_classes), 0);
    std::vector<double> margin(static_cast<std::size_t>(m.n_classes), 0.0);
    for (const auto& machine : m.machines) {
        const double f = svc_decision(m, machine, x);
        const int winner = f >= 0.0 ? machine.positive_class : machine.negative_class;
        votes[static_cast<std::size_t>(winner)]++;
        margin[static_cast<std::size_t>(machine.positive_class)] += f;
        margin[static_cast<std::size_t>(machine.negative_class)] -= f;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best])) best = c;
    }
    return static_cast<int>(best);
}

inline std::vector<int> svc_predict(const SvcModel& m, const Matrix& queries, unsigned threads = 1) {
    if (queries.cols() != m.support_vectors.cols() && m.support_vectors.rows() > 0)
        throw DimensionMismatchError("svc_predict: feature count mismatch");
    std::vector<int> out(queries.rows());
    parallel_for(queries.rows(), threads,
                 [&](std::size_t r) { out[r] = svc_predict_one(m, queries.row(r)); });
    return out;
}

}  // namespace ramanml
