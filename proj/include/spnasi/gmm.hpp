// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_GMM_HPP
#define SPNASI_GMM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "spnasi/common.hpp"
#include "spnasi/evidence.hpp"
#include "spnasi/kmeans.hpp"
#include "spnasi/spn.hpp"

namespace spnasi {

/// Diagonal-covariance Gaussian mixture.
struct DiagonalGmm {
    std::vector<double> weights;  // K, sums to one
    Matrix means;                 // K x B
    Matrix variances;             // K x B, each >= kVarianceFloor

    std::size_t num_components() const { return weights.size(); }
    std::size_t num_variables() const { return means.cols(); }

    friend bool operator==(const DiagonalGmm&, const DiagonalGmm&) = default;
};

struct EmParams {
    std::size_t num_components = 48;
    std::size_t max_iter = 200;
    double tol = 1e-5;  // on the change of mean log-likelihood
    std::uint64_t seed = 0;
};

struct EmIteration {
    double mean_log_likelihood = 0.0;
    bool rescued = false;  // a component was re-seeded before this evaluation
};

struct EmResult {
    DiagonalGmm model;
    std::vector<EmIteration> trace;  // trace[0] is the initial model
    std::size_t rescue_events = 0;
    bool converged = false;
};

/// Checks the mixture invariants; throws ErrorKind::structural on violation.
inline void check_gmm(const DiagonalGmm& m) {
    const std::size_t k = m.weights.size();
    if (k == 0) fail(ErrorKind::structural, "GMM has no components");
    if (m.means.rows() != k || m.variances.rows() != k || m.means.cols() != m.variances.cols() || m.means.cols() == 0)
        fail(ErrorKind::structural, "GMM parameter shapes disagree");
    double total = 0.0;
    for (double w : m.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::structural, "GMM weight negative or non-finite");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) fail(ErrorKind::structural, "GMM weights do not sum to one");
    for (double v : m.variances.data())
        if (!(v >= kVarianceFloor) || !std::isfinite(v)) fail(ErrorKind::structural, "GMM variance below floor");
    for (double mu : m.means.data())
        if (!std::isfinite(mu)) fail(ErrorKind::structural, "GMM mean is not finite");
}

/// Log-density under partial evidence with the same per-dimension semantics as
/// SPN leaves: density, upper-bounded integral, or unity.
inline double gmm_log_density(const DiagonalGmm& m, const Evidence& evidence) {
    const std::size_t b = m.num_variables();
    if (evidence.size() != b)
        fail(ErrorKind::input,
             "evidence length " + std::to_string(evidence.size()) + " != num_variables " + std::to_string(b));
    check_evidence_finite(evidence);
    std::vector<double> terms(m.num_components());
    for (std::size_t c = 0; c < terms.size(); ++c) {
        double acc = 0.0;
        for (std::size_t d = 0; d < b; ++d) acc += dimension_log_term(evidence[d], m.means(c, d), m.variances(c, d));
        terms[c] = std::log(m.weights[c]) + acc;
    }
    const double out = log_sum_exp(terms);
    return std::isnan(out) ? kNegInf : out;
}

inline std::size_t gmm_parameter_count(const DiagonalGmm& m) {
    return m.num_components() + 2 * m.num_components() * m.num_variables();
}

/// Re-expresses the mixture as a depth-2 SPN: a sum over K products of B
/// univariate leaves.
inline SpnGraph gmm_to_spn(const DiagonalGmm& m) {
    SpnGraph g;
    g.num_variables = m.num_variables();
    g.add(SumNode{});
    SumNode root;
    for (std::size_t c = 0; c < m.num_components(); ++c) {
        ProductNode prod;
        const NodeId pid = g.add(ProductNode{});
        for (std::size_t d = 0; d < m.num_variables(); ++d)
            prod.children.push_back(g.add(GaussianLeaf{{d}, {m.means(c, d)}, {m.variances(c, d)}}));
        g.nodes[pid] = std::move(prod);
        root.children.push_back(pid);
        root.weights.push_back(m.weights[c]);
    }
    g.nodes[0] = std::move(root);
    g.root = 0;
    return g;
}

namespace detail {

// Per-row log p(x_n) and, if requested, the K responsibilities per row.
inline std::vector<double> gmm_e_step(const DiagonalGmm& m, const Matrix& data, Matrix* resp) {
    const std::size_t n = data.rows();
    const std::size_t k = m.num_components();
    const std::size_t b = data.cols();
    std::vector<double> base(k);
    Matrix inv_var(k, b);
    for (std::size_t c = 0; c < k; ++c) {
        double log_det = 0.0;
        for (std::size_t d = 0; d < b; ++d) {
            log_det += std::log(m.variances(c, d));
            inv_var(c, d) = 1.0 / m.variances(c, d);
        }
        base[c] = std::log(m.weights[c]) - 0.5 * (static_cast<double>(b) * std::log(2.0 * std::numbers::pi) + log_det);
    }
    std::vector<double> row_ll(n);
    std::vector<double> joint(k);
    for (std::size_t r = 0; r < n; ++r) {
        const auto x = data.row(r);
        for (std::size_t c = 0; c < k; ++c) {
            double q = 0.0;
            for (std::size_t d = 0; d < b; ++d) {
                const double diff = x[d] - m.means(c, d);
                q += diff * diff * inv_var(c, d);
            }
            joint[c] = base[c] - 0.5 * q;
        }
        row_ll[r] = log_sum_exp(joint);
        if (resp != nullptr)
            for (std::size_t c = 0; c < k; ++c) (*resp)(r, c) = std::exp(joint[c] - row_ll[r]);
    }
    return row_ll;
}

inline double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

}  // namespace detail

namespace detail {

inline std::vector<double> global_variances(const Matrix& data) {
    const std::size_t n = data.rows(), b = data.cols();
    std::vector<double> mean(b, 0.0), var(b, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t d = 0; d < b; ++d) mean[d] += data(r, d);
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t d = 0; d < b; ++d) var[d] += (data(r, d) - mean[d]) * (data(r, d) - mean[d]);
    for (double& v : var) v = std::max(v / static_cast<double>(n), kVarianceFloor);
    return var;
}

inline void check_em_input(const Matrix& data, std::size_t k) {
    if (k == 0) fail(ErrorKind::input, "fit_em: number of components must be positive");
    if (data.cols() == 0) fail(ErrorKind::input, "fit_em: data has no columns");
    if (data.rows() < k) fail(ErrorKind::input, "fit_em: " + std::to_string(data.rows()) + " rows < k=" + std::to_string(k));
    for (double v : data.data())
        if (!std::isfinite(v)) fail(ErrorKind::input, "fit_em: data contains non-finite values");
}

}  // namespace detail

/// EM iterations from a given starting model. Components whose
/// responsibility mass vanishes are re-seeded at the currently least likely
/// instance; those iterations are flagged in the trace.
inline EmResult fit_em_from(const Matrix& data, DiagonalGmm initial, const EmParams& params) {
    const std::size_t n = data.rows();
    const std::size_t k = initial.num_components();
    const std::size_t b = data.cols();
    detail::check_em_input(data, k);
    check_gmm(initial);
    if (initial.num_variables() != b) fail(ErrorKind::input, "fit_em: initial model dimension does not match data");
    const auto global_var = detail::global_variances(data);

    EmResult out;
    out.model = std::move(initial);
    DiagonalGmm& m = out.model;

    Matrix resp(n, k);
    auto row_ll = detail::gmm_e_step(m, data, &resp);
    out.trace.push_back({detail::mean_of(row_ll), false});

    constexpr double kEmptyMass = 1e-8;
    for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
        std::vector<double> mass(k, 0.0);
        Matrix sum_x(k, b);
        for (std::size_t r = 0; r < n; ++r) {
            const auto x = data.row(r);
            for (std::size_t c = 0; c < k; ++c) {
                const double g = resp(r, c);
                if (g == 0.0) continue;
                mass[c] += g;
                for (std::size_t d = 0; d < b; ++d) sum_x(c, d) += g * x[d];
            }
        }
        for (std::size_t c = 0; c < k; ++c)
            if (mass[c] > kEmptyMass)
                for (std::size_t d = 0; d < b; ++d) m.means(c, d) = sum_x(c, d) / mass[c];

        // Variances from centered second moments around the new means.
        Matrix centered(k, b);
        for (std::size_t r = 0; r < n; ++r) {
            const auto x = data.row(r);
            for (std::size_t c = 0; c < k; ++c) {
                const double g = resp(r, c);
                if (g == 0.0) continue;
                for (std::size_t d = 0; d < b; ++d) {
                    const double diff = x[d] - m.means(c, d);
                    centered(c, d) += g * diff * diff;
                }
            }
        }

        bool rescued = false;
        std::vector<bool> used(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (mass[c] > kEmptyMass) {
                for (std::size_t d = 0; d < b; ++d)
                    m.variances(c, d) = std::max(centered(c, d) / mass[c], kVarianceFloor);
                continue;
            }
            std::size_t worst = n;
            for (std::size_t r = 0; r < n; ++r)
                if (!used[r] && (worst == n || row_ll[r] < row_ll[worst])) worst = r;
            used[worst] = true;
            for (std::size_t d = 0; d < b; ++d) {
                m.means(c, d) = data(worst, d);
                m.variances(c, d) = global_var[d];
            }
            mass[c] = 1.0;
            rescued = true;
            ++out.rescue_events;
        }
        double total_mass = 0.0;
        for (double w : mass) total_mass += w;
        for (std::size_t c = 0; c < k; ++c) m.weights[c] = mass[c] / total_mass;

        row_ll = detail::gmm_e_step(m, data, &resp);
        out.trace.push_back({detail::mean_of(row_ll), rescued});
        const double delta = out.trace.back().mean_log_likelihood - out.trace[out.trace.size() - 2].mean_log_likelihood;
        if (!rescued && std::abs(delta) < params.tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// EM for a diagonal GMM, initialised with k-means++ means, global
/// variances and uniform weights.
inline EmResult fit_em(const Matrix& data, const EmParams& params) {
    const std::size_t k = params.num_components;
    detail::check_em_input(data, k);
    const auto global_var = detail::global_variances(data);
    DiagonalGmm init{std::vector<double>(k, 1.0 / static_cast<double>(k)), Matrix(k, data.cols()), Matrix(k, data.cols())};
    std::mt19937_64 rng(params.seed);
    const auto seeds = kmeans_pp_seeds(data, k, rng);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t d = 0; d < data.cols(); ++d) {
            init.means(c, d) = data(seeds[c], d);
            init.variances(c, d) = global_var[d];
        }
    // Uniform weights of 1/k may miss the exact-sum check by rounding.
    init.weights.back() = 1.0 - std::accumulate(init.weights.begin(), init.weights.end() - 1, 0.0);
    return fit_em_from(data, std::move(init), params);
}

}  // namespace spnasi

#endif
