// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_KMEANS_HPP
#define SPNASI_KMEANS_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "spnasi/common.hpp"

namespace spnasi {

/// Centers each column and scales it to unit variance. Constant columns are
/// only centered.
inline Matrix standardize_columns(const Matrix& data) {
    Matrix out = data;
    const std::size_t n = data.rows();
    for (std::size_t c = 0; c < data.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += data(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (data(r, c) - mean) * (data(r, c) - mean);
        var /= static_cast<double>(n);
        const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
        for (std::size_t r = 0; r < n; ++r) out(r, c) = (data(r, c) - mean) * scale;
    }
    return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

/// k-means++ seeding: the first center uniformly, every further one with
/// probability proportional to its squared distance from the nearest chosen
/// center. Returns distinct row indices.
inline std::vector<std::size_t> kmeans_pp_seeds(const Matrix& data, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = data.rows();
    if (k == 0 || k > n) fail(ErrorKind::input, "k-means++ needs 1 <= k <= rows");
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    std::vector<bool> taken(n, false);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

    auto take = [&](std::size_t idx) {
        chosen.push_back(idx);
        taken[idx] = true;
        for (std::size_t r = 0; r < n; ++r)
            nearest[r] = std::min(nearest[r], squared_distance(data.row(r), data.row(idx)));
    };

    take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    while (chosen.size() < k) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            if (!taken[r]) total += nearest[r];
        std::size_t pick = n;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (std::size_t r = 0; r < n; ++r) {
                if (taken[r] || nearest[r] <= 0.0) continue;
                pick = r;
                u -= nearest[r];
                if (u < 0.0) break;
            }
        } else {
            // Every remaining point coincides with a center: pick uniformly among them.
            const std::size_t remaining = n - chosen.size();
            std::size_t j = std::uniform_int_distribution<std::size_t>(0, remaining - 1)(rng);
            for (std::size_t r = 0; r < n; ++r) {
                if (taken[r]) continue;
                if (j-- == 0) {
                    pick = r;
                    break;
                }
            }
        }
        take(pick);
    }
    return chosen;
}

struct Clustering {
    std::vector<std::size_t> labels;  // per row, in [0, k)
    std::vector<std::size_t> sizes;   // per cluster, all >= 1
    std::size_t iterations = 0;
    bool converged = false;
};

/// Hard k-means on column-standardized data with k-means++ seeding.
/// Empty clusters are re-seeded from the point farthest from its center.
inline Clustering cluster_instances(const Matrix& data, std::size_t k, std::size_t max_iter, std::uint64_t seed) {
    const std::size_t n = data.rows();
    if (k == 0) fail(ErrorKind::input, "cluster_instances: k must be positive");
    if (n < k) fail(ErrorKind::input, "cluster_instances: " + std::to_string(n) + " rows < k=" + std::to_string(k));

    const Matrix x = standardize_columns(data);
    const std::size_t dims = x.cols();
    std::mt19937_64 rng(seed);

    Matrix centers(k, dims);
    {
        const auto seeds = kmeans_pp_seeds(x, k, rng);
        for (std::size_t j = 0; j < k; ++j) std::ranges::copy(x.row(seeds[j]), centers.row(j).begin());
    }

    Clustering out;
    out.labels.assign(n, k);  // sentinel: nothing assigned yet
    std::vector<std::size_t> labels(n);
    std::vector<double> dist(n);
    std::vector<std::size_t> sizes(k);

    for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
        std::ranges::fill(sizes, 0);
        for (std::size_t r = 0; r < n; ++r) {
            std::size_t best = 0;
            double best_d = squared_distance(x.row(r), centers.row(0));
            for (std::size_t j = 1; j < k; ++j) {
                const double d = squared_distance(x.row(r), centers.row(j));
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            labels[r] = best;
            dist[r] = best_d;
            ++sizes[best];
        }

        for (std::size_t j = 0; j < k; ++j) {
            if (sizes[j] != 0) continue;
            std::size_t far = n;
            for (std::size_t r = 0; r < n; ++r) {
                if (sizes[labels[r]] < 2) continue;
                if (far == n || dist[r] > dist[far]) far = r;
            }
            --sizes[labels[far]];
            labels[far] = j;
            dist[far] = 0.0;
            sizes[j] = 1;
            std::ranges::copy(x.row(far), centers.row(j).begin());
        }

        out.iterations = iter + 1;
        if (labels == out.labels) {
            out.converged = true;
            break;
        }
        out.labels = labels;

        Matrix sums(k, dims);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < dims; ++c) sums(labels[r], c) += x(r, c);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t c = 0; c < dims; ++c) centers(j, c) = sums(j, c) / static_cast<double>(sizes[j]);
    }
    out.labels = labels;
    out.sizes = sizes;
    return out;
}

}  // namespace spnasi

#endif
