// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_RDC_HPP
#define SPNASI_RDC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spnasi/common.hpp"

namespace spnasi {

/// Empirical copula transform: rank / n, ties sharing their highest rank.
inline std::vector<double> copula_transform(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> u(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        for (std::size_t t = i; t <= j; ++t) u[idx[t]] = static_cast<double>(j + 1) / static_cast<double>(n);
        i = j + 1;
    }
    return u;
}

/// Random sine features of one variable, centered and whitened so that
/// canonical correlations reduce to singular values of a cross product.
/// `basis` is empty (zero columns) for a constant variable.
struct RdcFeatures {
    Eigen::MatrixXd basis;  // n x r, columns orthonormal under (1/n) inner product
};

namespace detail {

// Relative eigenvalue cutoff when whitening near-collinear sine features.
inline constexpr double kRdcRankTolerance = 1e-10;

}  // namespace detail

inline RdcFeatures rdc_features(std::span<const double> x, std::size_t num_features, double scale,
                                std::uint64_t seed) {
    const std::size_t n = x.size();
    const auto u = copula_transform(x);
    double mean_u = 0.0;
    for (double v : u) mean_u += v;
    mean_u /= static_cast<double>(n);
    double var_u = 0.0;
    for (double v : u) var_u += (v - mean_u) * (v - mean_u);
    if (!(var_u > 0.0)) return {Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0)};

    // Affine projection of (u, 1) with Normal(0, scale^2) coefficients, then sin.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto k = static_cast<Eigen::Index>(num_features);
    Eigen::MatrixXd proj(2, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        proj(0, j) = scale * gauss(rng);
        proj(1, j) = scale * gauss(rng);
    }
    Eigen::MatrixXd f(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index r = 0; r < f.rows(); ++r)
        for (Eigen::Index j = 0; j < k; ++j) f(r, j) = std::sin(u[static_cast<std::size_t>(r)] * proj(0, j) + proj(1, j));

    f.rowwise() -= f.colwise().mean();
    const Eigen::MatrixXd cov = (f.transpose() * f) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0.0)) return {Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0)};
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > detail::kRdcRankTolerance * top) keep.push_back(i);
    Eigen::MatrixXd w(k, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        w.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(keep[j]) / std::sqrt(ev(keep[j]));
    return {f * w};
}

/// Largest canonical correlation between two whitened feature blocks, in [0, 1].
inline double max_canonical_correlation(const RdcFeatures& a, const RdcFeatures& b) {
    if (a.basis.cols() == 0 || b.basis.cols() == 0) return 0.0;
    const double n = static_cast<double>(a.basis.rows());
    const Eigen::MatrixXd cross = (a.basis.transpose() * b.basis) / n;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
    const double s = svd.singularValues()(0);
    return std::clamp(std::isfinite(s) ? s : 0.0, 0.0, 1.0);
}

/// Randomized dependence coefficient between two samples: copula transform,
/// random sine features, largest canonical correlation. Deterministic in `seed`.
inline double rdc_dependence(std::span<const double> x, std::span<const double> y, std::size_t num_features,
                             double scale, std::uint64_t seed) {
    if (x.size() != y.size()) fail(ErrorKind::input, "rdc_dependence: samples differ in length");
    if (x.size() < 3) fail(ErrorKind::input, "rdc_dependence: need at least 3 samples");
    if (num_features == 0) fail(ErrorKind::input, "rdc_dependence: num_features must be positive");
    const auto fx = rdc_features(x, num_features, scale, derive_seed(seed, std::uint64_t{0}));
    const auto fy = rdc_features(y, num_features, scale, derive_seed(seed, std::uint64_t{1}));
    return max_canonical_correlation(fx, fy);
}

}  // namespace spnasi

#endif
