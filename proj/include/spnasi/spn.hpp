// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_SPN_HPP
#define SPNASI_SPN_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spnasi/common.hpp"
#include "spnasi/evidence.hpp"

namespace spnasi {

/// Dense index into SpnGraph::nodes.
using NodeId = std::size_t;

/// Sorted, duplicate-free set of variable indices.
using Scope = std::vector<std::size_t>;

/// Diagonal Gaussian over an ordered subset of the feature variables.
struct GaussianLeaf {
    std::vector<std::size_t> var_indices;  // strictly increasing
    std::vector<double> means;
    std::vector<double> variances;

    friend bool operator==(const GaussianLeaf&, const GaussianLeaf&) = default;
};

struct SumNode {
    std::vector<NodeId> children;
    std::vector<double> weights;

    friend bool operator==(const SumNode&, const SumNode&) = default;
};

struct ProductNode {
    std::vector<NodeId> children;

    friend bool operator==(const ProductNode&, const ProductNode&) = default;
};

using SpnNode = std::variant<SumNode, ProductNode, GaussianLeaf>;

/// Rooted DAG of sum, product and Gaussian leaf nodes over `num_variables`
/// feature components. A plain value: nothing is checked on construction, use
/// validate() or Spn::make() for that.
struct SpnGraph {
    std::vector<SpnNode> nodes;
    NodeId root = 0;
    std::size_t num_variables = 0;

    NodeId add(SpnNode node) {
        nodes.push_back(std::move(node));
        return nodes.size() - 1;
    }

    friend bool operator==(const SpnGraph&, const SpnGraph&) = default;
};

inline const std::vector<NodeId>& children_of(const SpnNode& node) {
    static const std::vector<NodeId> none;
    if (const auto* s = std::get_if<SumNode>(&node)) return s->children;
    if (const auto* p = std::get_if<ProductNode>(&node)) return p->children;
    return none;
}

inline std::string_view kind_name(const SpnNode& node) {
    switch (node.index()) {
        case 0: return "sum";
        case 1: return "product";
        default: return "leaf";
    }
}

namespace detail {

inline bool references_valid(const SpnGraph& g) {
    if (g.root >= g.nodes.size()) return false;
    for (const auto& node : g.nodes)
        for (NodeId c : children_of(node))
            if (c >= g.nodes.size()) return false;
    return true;
}

// Children-before-parents order of every node reachable from `root`.
// Returns false if a cycle is found. References must be valid.
inline bool post_order(const SpnGraph& g, NodeId root, std::vector<NodeId>& order) {
    enum : unsigned char { white, grey, black };
    std::vector<unsigned char> color(g.nodes.size(), white);
    std::vector<std::pair<NodeId, std::size_t>> stack{{root, 0}};
    color[root] = grey;
    while (!stack.empty()) {
        auto& [id, next] = stack.back();
        const auto& kids = children_of(g.nodes[id]);
        if (next < kids.size()) {
            const NodeId c = kids[next++];
            if (color[c] == grey) return false;
            if (color[c] == white) {
                color[c] = grey;
                stack.emplace_back(c, 0);
            }
        } else {
            color[id] = black;
            order.push_back(id);
            stack.pop_back();
        }
    }
    return true;
}

inline bool is_acyclic(const SpnGraph& g) {
    std::vector<NodeId> order;
    std::vector<bool> seen(g.nodes.size(), false);
    for (NodeId start = 0; start < g.nodes.size(); ++start) {
        if (seen[start]) continue;
        order.clear();
        if (!post_order(g, start, order)) return false;
        for (NodeId id : order) seen[id] = true;
    }
    return true;
}

inline Scope merge_scopes(const Scope& a, const Scope& b) {
    Scope out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline bool scopes_disjoint(const Scope& a, const Scope& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return false;
        if (*i < *j) ++i; else ++j;
    }
    return true;
}

inline Scope leaf_scope(const GaussianLeaf& leaf) {
    Scope s = leaf.var_indices;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

}  // namespace detail

/// Scopes of every node, memoized in one bottom-up pass.
/// Throws ErrorKind::structural on dangling references or cycles.
inline std::vector<Scope> compute_scopes(const SpnGraph& g) {
    if (!detail::references_valid(g)) fail(ErrorKind::structural, "graph has dangling child references");
    if (!detail::is_acyclic(g)) fail(ErrorKind::structural, "cycle detected in graph");
    std::vector<Scope> scopes(g.nodes.size());
    std::vector<bool> done(g.nodes.size(), false);
    std::vector<NodeId> order;
    for (NodeId start = 0; start < g.nodes.size(); ++start) {
        if (done[start]) continue;
        order.clear();
        detail::post_order(g, start, order);
        for (NodeId id : order) {
            if (done[id]) continue;
            if (const auto* leaf = std::get_if<GaussianLeaf>(&g.nodes[id])) {
                scopes[id] = detail::leaf_scope(*leaf);
            } else {
                Scope acc;
                for (NodeId c : children_of(g.nodes[id])) acc = detail::merge_scopes(acc, scopes[c]);
                scopes[id] = std::move(acc);
            }
            done[id] = true;
        }
    }
    return scopes;
}

inline Scope scope(const SpnGraph& g, NodeId node) {
    if (node >= g.nodes.size()) fail(ErrorKind::input, "node id " + std::to_string(node) + " out of range");
    return compute_scopes(g)[node];
}

struct ValidityReport {
    bool references_valid = true;
    bool is_acyclic = true;
    bool all_reachable = true;
    bool nodes_well_formed = true;   // arities, leaf parameter shapes and ranges
    bool is_complete = true;
    bool is_decomposable = true;
    bool weights_nonneg = true;
    bool weights_normalized = true;
    bool root_covers_all_variables = true;
    std::vector<std::pair<NodeId, std::string>> offending_nodes;

    /// Structurally sound: exact inference is defined. Normalization is not required.
    bool is_valid() const {
        return references_valid && is_acyclic && all_reachable && nodes_well_formed && is_complete &&
               is_decomposable && weights_nonneg && root_covers_all_variables;
    }

    friend bool operator==(const ValidityReport&, const ValidityReport&) = default;
};

inline constexpr double kWeightSumTolerance = 1e-12;

/// Checks every structural property and reports all defects; never throws.
inline ValidityReport validate(const SpnGraph& g) {
    ValidityReport r;
    auto offend = [&](NodeId id, std::string why) { r.offending_nodes.emplace_back(id, std::move(why)); };

    if (g.nodes.empty()) {
        r.references_valid = false;
        offend(0, "graph has no nodes");
        return r;
    }
    if (g.root >= g.nodes.size()) {
        r.references_valid = false;
        offend(g.root, "root id out of range");
    }
    for (NodeId id = 0; id < g.nodes.size(); ++id) {
        for (NodeId c : children_of(g.nodes[id])) {
            if (c >= g.nodes.size()) {
                r.references_valid = false;
                offend(id, "child " + std::to_string(c) + " out of range");
            }
        }
    }

    // Per-node shape checks do not depend on graph topology.
    for (NodeId id = 0; id < g.nodes.size(); ++id) {
        const auto& node = g.nodes[id];
        if (const auto* s = std::get_if<SumNode>(&node)) {
            if (s->children.empty() || s->children.size() != s->weights.size()) {
                r.nodes_well_formed = false;
                offend(id, "sum node needs matching non-empty children and weights");
            }
            double total = 0.0;
            bool nonneg = true;
            for (double w : s->weights) {
                if (!(w >= 0.0) || !std::isfinite(w)) nonneg = false;
                total += w;
            }
            if (!nonneg) {
                r.weights_nonneg = false;
                offend(id, "negative or non-finite weight");
            }
            if (!(std::abs(total - 1.0) <= kWeightSumTolerance)) r.weights_normalized = false;
        } else if (const auto* p = std::get_if<ProductNode>(&node)) {
            if (p->children.empty()) {
                r.nodes_well_formed = false;
                offend(id, "product node without children");
            }
        } else {
            const auto& leaf = std::get<GaussianLeaf>(node);
            const std::size_t n = leaf.var_indices.size();
            bool ok = n > 0 && leaf.means.size() == n && leaf.variances.size() == n;
            for (std::size_t d = 0; ok && d < n; ++d) {
                if (leaf.var_indices[d] >= g.num_variables) ok = false;
                if (d > 0 && leaf.var_indices[d] <= leaf.var_indices[d - 1]) ok = false;
                if (!std::isfinite(leaf.means[d])) ok = false;
                if (!(leaf.variances[d] > 0.0) || !std::isfinite(leaf.variances[d])) ok = false;
            }
            if (!ok) {
                r.nodes_well_formed = false;
                offend(id, "malformed leaf (indices, shapes or variances)");
            }
        }
    }

    if (!r.references_valid) {
        r.is_acyclic = r.all_reachable = r.is_complete = r.is_decomposable = false;
        r.root_covers_all_variables = false;
        return r;
    }

    if (!detail::is_acyclic(g)) {
        r.is_acyclic = false;
        r.is_complete = r.is_decomposable = r.root_covers_all_variables = false;
        offend(g.root, "cycle detected");
        return r;
    }

    std::vector<NodeId> order;
    detail::post_order(g, g.root, order);
    if (order.size() != g.nodes.size()) {
        r.all_reachable = false;
        std::vector<bool> reached(g.nodes.size(), false);
        for (NodeId id : order) reached[id] = true;
        for (NodeId id = 0; id < g.nodes.size(); ++id)
            if (!reached[id]) offend(id, "unreachable from root");
    }

    const auto scopes = compute_scopes(g);
    for (NodeId id = 0; id < g.nodes.size(); ++id) {
        const auto& kids = children_of(g.nodes[id]);
        if (std::holds_alternative<SumNode>(g.nodes[id])) {
            for (std::size_t i = 1; i < kids.size(); ++i) {
                if (scopes[kids[i]] != scopes[kids[0]]) {
                    r.is_complete = false;
                    offend(id, "incomplete: sum children have different scopes");
                    break;
                }
            }
        } else if (std::holds_alternative<ProductNode>(g.nodes[id])) {
            bool disjoint = true;
            for (std::size_t i = 0; i < kids.size() && disjoint; ++i)
                for (std::size_t j = i + 1; j < kids.size() && disjoint; ++j)
                    disjoint = detail::scopes_disjoint(scopes[kids[i]], scopes[kids[j]]);
            if (!disjoint) {
                r.is_decomposable = false;
                offend(id, "not decomposable: product children share variables");
            }
        }
    }

    Scope all(g.num_variables);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (scopes[g.root] != all) {
        r.root_covers_all_variables = false;
        offend(g.root, "root scope does not cover all variables");
    }
    return r;
}

/// Log-density of a leaf under partial evidence. All-missing gives 0.
inline double leaf_log_value(const GaussianLeaf& leaf, const Evidence& evidence) {
    double acc = 0.0;
    for (std::size_t d = 0; d < leaf.var_indices.size(); ++d) {
        const std::size_t v = leaf.var_indices[d];
        if (v >= evidence.size()) fail(ErrorKind::input, "evidence does not cover leaf variable " + std::to_string(v));
        const auto& s = evidence[v];
        if (s.kind != VariableState::Kind::missing && !std::isfinite(s.value))
            fail(ErrorKind::input, "evidence component " + std::to_string(v) + " is not finite");
        acc += dimension_log_term(s, leaf.means[d], leaf.variances[d]);
    }
    return acc;
}

/// A graph that passed validation, with its evaluation order cached.
/// Immutable; concurrent log_density calls are safe.
class Spn {
public:
    static Spn make(SpnGraph graph) {
        const auto report = validate(graph);
        if (!report.is_valid()) {
            std::string why = "invalid SPN";
            if (!report.offending_nodes.empty())
                why += ": node " + std::to_string(report.offending_nodes.front().first) + " " +
                       report.offending_nodes.front().second;
            fail(ErrorKind::structural, why);
        }
        Spn s;
        detail::post_order(graph, graph.root, s.order_);
        s.graph_ = std::make_shared<const SpnGraph>(std::move(graph));
        return s;
    }

    const SpnGraph& graph() const { return *graph_; }
    std::size_t num_variables() const { return graph_->num_variables; }

    double log_density(const Evidence& evidence) const {
        std::vector<double> scratch;
        return log_density(evidence, scratch);
    }

    /// Same as above; reuses `scratch` for per-node values.
    double log_density(const Evidence& evidence, std::vector<double>& scratch) const {
        const auto& g = *graph_;
        if (evidence.size() != g.num_variables)
            fail(ErrorKind::input, "evidence length " + std::to_string(evidence.size()) + " != num_variables " +
                                       std::to_string(g.num_variables));
        check_evidence_finite(evidence);
        scratch.resize(g.nodes.size());
        std::vector<double> terms;
        for (NodeId id : order_) {
            const auto& node = g.nodes[id];
            if (const auto* s = std::get_if<SumNode>(&node)) {
                terms.resize(s->children.size());
                for (std::size_t i = 0; i < terms.size(); ++i)
                    terms[i] = std::log(s->weights[i]) + scratch[s->children[i]];
                scratch[id] = log_sum_exp(terms);
            } else if (const auto* p = std::get_if<ProductNode>(&node)) {
                double acc = 0.0;
                for (NodeId c : p->children) acc += scratch[c];
                scratch[id] = acc;
            } else {
                const auto& leaf = std::get<GaussianLeaf>(node);
                double acc = 0.0;
                for (std::size_t d = 0; d < leaf.var_indices.size(); ++d)
                    acc += dimension_log_term(evidence[leaf.var_indices[d]], leaf.means[d], leaf.variances[d]);
                scratch[id] = acc;
            }
        }
        const double out = scratch[g.root];
        return std::isnan(out) ? kNegInf : out;
    }

private:
    std::shared_ptr<const SpnGraph> graph_;
    std::vector<NodeId> order_;
};

/// Validates `g` and evaluates the root log-density in one bottom-up pass.
inline double log_density(const SpnGraph& g, const Evidence& evidence) {
    return Spn::make(g).log_density(evidence);
}

/// Rescales every sum node's weights to sum to one.
inline SpnGraph normalize_weights(SpnGraph g) {
    for (NodeId id = 0; id < g.nodes.size(); ++id) {
        auto* s = std::get_if<SumNode>(&g.nodes[id]);
        if (s == nullptr) continue;
        double total = 0.0;
        for (double w : s->weights) {
            if (!(w >= 0.0)) fail(ErrorKind::input, "negative weight at sum node " + std::to_string(id));
            total += w;
        }
        if (!(total > 0.0) || !std::isfinite(total))
            fail(ErrorKind::degenerate, "sum node " + std::to_string(id) + " has no positive weight");
        for (double& w : s->weights) w /= total;
    }
    return g;
}

/// Sum-node weights plus one mean and one variance per leaf dimension.
inline std::size_t parameter_count(const SpnGraph& g) {
    std::size_t n = 0;
    for (const auto& node : g.nodes) {
        if (const auto* s = std::get_if<SumNode>(&node)) n += s->weights.size();
        else if (const auto* leaf = std::get_if<GaussianLeaf>(&node)) n += 2 * leaf->var_indices.size();
    }
    return n;
}

struct GraphSummary {
    std::size_t sums = 0;
    std::size_t products = 0;
    std::size_t leaves = 0;
    std::size_t depth = 0;  // edges on the longest root-to-leaf path
};

inline GraphSummary summarize(const SpnGraph& g) {
    GraphSummary s;
    for (const auto& node : g.nodes) {
        switch (node.index()) {
            case 0: ++s.sums; break;
            case 1: ++s.products; break;
            default: ++s.leaves; break;
        }
    }
    if (!detail::references_valid(g) || !detail::is_acyclic(g)) return s;
    std::vector<NodeId> order;
    detail::post_order(g, g.root, order);
    std::vector<std::size_t> height(g.nodes.size(), 0);
    for (NodeId id : order)
        for (NodeId c : children_of(g.nodes[id])) height[id] = std::max(height[id], height[c] + 1);
    s.depth = height[g.root];
    return s;
}

}  // namespace spnasi

#endif
