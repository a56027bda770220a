// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_LEARN_SPN_HPP
#define SPNASI_LEARN_SPN_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "spnasi/common.hpp"
#include "spnasi/kmeans.hpp"
#include "spnasi/rdc.hpp"
#include "spnasi/spn.hpp"

namespace spnasi {

struct LearnParams {
    std::size_t min_instances_to_split = 50;
    double independence_threshold = 0.3;
    std::size_t rdc_num_features = 20;
    double rdc_scale = 1.0 / 6.0;
    std::size_t cluster_k = 2;
    std::size_t kmeans_max_iter = 100;
    std::uint64_t seed = 0;
};

inline void check_learn_params(const LearnParams& p) {
    if (!(p.independence_threshold >= 0.0 && p.independence_threshold <= 1.0))
        fail(ErrorKind::input, "independence_threshold must lie in [0, 1]");
    if (p.min_instances_to_split < 2) fail(ErrorKind::input, "min_instances_to_split must be >= 2");
    if (p.cluster_k < 2) fail(ErrorKind::input, "cluster_k must be >= 2");
    if (p.rdc_num_features == 0) fail(ErrorKind::input, "rdc_num_features must be positive");
    if (!(p.rdc_scale > 0.0)) fail(ErrorKind::input, "rdc_scale must be positive");
}

/// Univariate Gaussian leaf with the MLE mean and the biased variance, floored.
inline GaussianLeaf fit_leaf(std::span<const double> values, std::size_t var_index = 0) {
    if (values.empty()) fail(ErrorKind::input, "fit_leaf: no values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return GaussianLeaf{{var_index}, {mean}, {std::max(var, kVarianceFloor)}};
}

/// Connected components of the graph joining columns whose pairwise RDC
/// reaches the threshold. Components are sorted internally and by their
/// smallest member. A single component means no split is possible.
inline std::vector<std::vector<std::size_t>> partition_variables(const Matrix& data, const LearnParams& params) {
    const std::size_t cols = data.cols();
    if (cols < 2) fail(ErrorKind::input, "partition_variables: need at least 2 columns");
    if (data.rows() < 3) fail(ErrorKind::input, "partition_variables: need at least 3 rows");

    std::vector<RdcFeatures> features;
    features.reserve(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        const auto column = data.column(c);
        features.push_back(rdc_features(column, params.rdc_num_features, params.rdc_scale, derive_seed(params.seed, c)));
    }

    std::vector<std::size_t> parent(cols);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t j = i + 1; j < cols; ++j) {
            if (find(i) == find(j)) continue;
            if (max_canonical_correlation(features[i], features[j]) >= params.independence_threshold) {
                const std::size_t a = find(i), b = find(j);
                parent[std::max(a, b)] = std::min(a, b);
            }
        }
    }
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> slot(cols, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t r = find(c);
        if (slot[r] == cols) {
            slot[r] = groups.size();
            groups.emplace_back();
        }
        groups[slot[r]].push_back(c);
    }
    return groups;
}

namespace detail {

class SpnLearner {
public:
    SpnLearner(const Matrix& data, const LearnParams& params) : data_(data), params_(params) {}

    SpnGraph run() {
        std::vector<std::size_t> rows(data_.rows()), cols(data_.cols());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        std::iota(cols.begin(), cols.end(), std::size_t{0});
        graph_.num_variables = data_.cols();
        graph_.root = learn(rows, cols, params_.seed, rows.size() + 1, cols.size() + 1);
        return std::move(graph_);
    }

private:
    Matrix slice(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const {
        Matrix m(rows.size(), cols.size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < cols.size(); ++c) m(r, c) = data_(rows[r], cols[c]);
        return m;
    }

    NodeId leaf(const std::vector<std::size_t>& rows, std::size_t col) {
        std::vector<double> v(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) v[r] = data_(rows[r], col);
        return graph_.add(fit_leaf(v, col));
    }

    NodeId naive_factorization(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
        ProductNode prod;
        for (std::size_t c : cols) prod.children.push_back(leaf(rows, c));
        return graph_.add(std::move(prod));
    }

    // Every call must make progress relative to its parent: fewer columns
    // after a variable split, fewer rows after an instance split.
    NodeId learn(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols, std::uint64_t seed,
                 std::size_t parent_rows, std::size_t parent_cols) {
        if (!(rows.size() < parent_rows || cols.size() < parent_cols))
            fail(ErrorKind::training, "structure learning made no progress");
        if (cols.size() == 1) return leaf(rows, cols.front());

        const Matrix local = slice(rows, cols);
        if (rows.size() >= 3) {
            LearnParams p = params_;
            p.seed = derive_seed(seed, "partition");
            const auto groups = partition_variables(local, p);
            if (groups.size() >= 2) {
                ProductNode prod;
                for (std::size_t gi = 0; gi < groups.size(); ++gi) {
                    std::vector<std::size_t> sub;
                    for (std::size_t c : groups[gi]) sub.push_back(cols[c]);
                    prod.children.push_back(learn(rows, sub, derive_seed(seed, gi), rows.size(), cols.size()));
                }
                return graph_.add(std::move(prod));
            }
        }

        if (rows.size() >= params_.min_instances_to_split && rows.size() >= params_.cluster_k) {
            const auto clusters =
                cluster_instances(local, params_.cluster_k, params_.kmeans_max_iter, derive_seed(seed, "cluster"));
            std::vector<std::vector<std::size_t>> members(params_.cluster_k);
            for (std::size_t r = 0; r < rows.size(); ++r) members[clusters.labels[r]].push_back(rows[r]);
            SumNode sum;
            for (std::size_t j = 0; j < members.size(); ++j) {
                sum.children.push_back(
                    learn(members[j], cols, derive_seed(seed, 1000 + j), rows.size(), cols.size()));
                sum.weights.push_back(static_cast<double>(members[j].size()) / static_cast<double>(rows.size()));
            }
            return graph_.add(std::move(sum));
        }
        return naive_factorization(rows, cols);
    }

    const Matrix& data_;
    const LearnParams& params_;
    SpnGraph graph_;
};

}  // namespace detail

/// LearnSPN: alternately split variables into dependence components (product
/// nodes) and cluster instances (sum nodes weighted by cluster proportions),
/// down to univariate Gaussian leaves. Falls back to a fully factorized
/// product once a block is too small to cluster.
inline SpnGraph learn_spn(const Matrix& data, const LearnParams& params) {
    check_learn_params(params);
    if (data.rows() == 0 || data.cols() == 0) fail(ErrorKind::input, "learn_spn: empty data matrix");
    for (double v : data.data())
        if (!std::isfinite(v)) fail(ErrorKind::input, "learn_spn: data contains non-finite values");
    return detail::SpnLearner(data, params).run();
}

}  // namespace spnasi

#endif
