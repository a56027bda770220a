// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_TESTS_SUPPORT_HPP
#define SPNASI_TESTS_SUPPORT_HPP

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "spnasi/evidence.hpp"
#include "spnasi/spn.hpp"

namespace spnasi::testing {

/// Sum over two products, each a product of univariate leaves on X0 and X1.
inline SpnGraph figure1_graph(double w0 = 0.3, double w1 = 0.7) {
    SpnGraph g;
    g.num_variables = 2;
    const auto a0 = g.add(GaussianLeaf{{0}, {0.0}, {1.0}});
    const auto a1 = g.add(GaussianLeaf{{1}, {1.0}, {2.0}});
    const auto b0 = g.add(GaussianLeaf{{0}, {3.0}, {0.5}});
    const auto b1 = g.add(GaussianLeaf{{1}, {-1.0}, {1.5}});
    const auto p0 = g.add(ProductNode{{a0, a1}});
    const auto p1 = g.add(ProductNode{{b0, b1}});
    g.root = g.add(SumNode{{p0, p1}, {w0, w1}});
    return g;
}

/// log of the integral of N(x; mean, var) over (-inf, u], by adaptive
/// double-exponential quadrature of the density shifted to peak at one.
inline double quadrature_log_cdf(double u, double mean, double var) {
    const double at_u = normal::log_pdf(u, mean, var);
    auto f = [&](double s) { return std::exp(normal::log_pdf(u - s, mean, var) - at_u); };
    boost::math::quadrature::exp_sinh<double> integrator;
    const double value = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
    return at_u + std::log(value);
}

inline double oracle_dimension(const VariableState& s, double mean, double var) {
    switch (s.kind) {
        case VariableState::Kind::observed: return normal::log_pdf(s.value, mean, var);
        case VariableState::Kind::missing: return 0.0;
        case VariableState::Kind::upper_bounded: return quadrature_log_cdf(s.value, mean, var);
    }
    return 0.0;
}

/// One fully expanded mixture term: a weight and the leaves whose product it is.
struct Term {
    double weight = 1.0;
    std::vector<const GaussianLeaf*> leaves;
};

inline std::vector<Term> expand(const SpnGraph& g, NodeId id) {
    const auto& node = g.nodes[id];
    if (const auto* leaf = std::get_if<GaussianLeaf>(&node)) return {Term{1.0, {leaf}}};
    if (const auto* s = std::get_if<SumNode>(&node)) {
        std::vector<Term> out;
        for (std::size_t i = 0; i < s->children.size(); ++i)
            for (auto t : expand(g, s->children[i])) {
                t.weight *= s->weights[i];
                out.push_back(std::move(t));
            }
        return out;
    }
    std::vector<Term> out{Term{}};
    for (NodeId c : std::get<ProductNode>(node).children) {
        const auto sub = expand(g, c);
        std::vector<Term> next;
        for (const auto& a : out)
            for (const auto& b : sub) {
                Term t{a.weight * b.weight, a.leaves};
                t.leaves.insert(t.leaves.end(), b.leaves.begin(), b.leaves.end());
                next.push_back(std::move(t));
            }
        out = std::move(next);
    }
    return out;
}

/// Density of the expanded mixture; bounded components integrated numerically.
inline double oracle_log_density(const SpnGraph& g, const Evidence& e) {
    std::vector<double> logs;
    for (const auto& t : expand(g, g.root)) {
        double acc = std::log(t.weight);
        for (const auto* leaf : t.leaves)
            for (std::size_t d = 0; d < leaf->var_indices.size(); ++d)
                acc += oracle_dimension(e[leaf->var_indices[d]], leaf->means[d], leaf->variances[d]);
        logs.push_back(acc);
    }
    return log_sum_exp(logs);
}

/// Random valid SPNs with a bounded node count. Sum nodes may share children,
/// so the result is a DAG rather than a tree.
class RandomSpnBuilder {
public:
    RandomSpnBuilder(std::uint64_t seed, std::size_t max_nodes) : rng_(seed), max_nodes_(max_nodes) {}

    SpnGraph build(std::size_t num_variables) {
        g_ = SpnGraph{};
        g_.num_variables = num_variables;
        made_.clear();
        Scope all(num_variables);
        std::iota(all.begin(), all.end(), std::size_t{0});
        g_.root = make(all, 0);
        return g_;
    }

private:
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
    bool budget(std::size_t extra) const { return g_.nodes.size() + extra <= max_nodes_; }

    NodeId leaf(const Scope& scope) {
        GaussianLeaf l{scope, {}, {}};
        for (std::size_t i = 0; i < scope.size(); ++i) {
            l.means.push_back(uniform(-3.0, 3.0));
            l.variances.push_back(uniform(0.2, 3.0));
        }
        return remember(scope, g_.add(l));
    }

    NodeId remember(const Scope& scope, NodeId id) {
        made_.emplace_back(scope, id);
        return id;
    }

    NodeId make(const Scope& scope, std::size_t depth) {
        // Leaves for a whole multi-variable scope are allowed too.
        if (depth > 3 || !budget(4) || (scope.size() == 1 && pick(0, 2) == 0) || pick(0, 5) == 0) return leaf(scope);
        if (scope.size() > 1 && pick(0, 1) == 0) {
            Scope shuffled = scope;
            std::shuffle(shuffled.begin(), shuffled.end(), rng_);
            const std::size_t parts = pick(2, shuffled.size());
            std::vector<Scope> groups(parts);
            for (std::size_t i = 0; i < shuffled.size(); ++i) groups[i < parts ? i : pick(0, parts - 1)].push_back(shuffled[i]);
            ProductNode p;
            for (auto& grp : groups) {
                std::sort(grp.begin(), grp.end());
                p.children.push_back(make(grp, depth + 1));
            }
            return remember(scope, g_.add(p));
        }
        SumNode s;
        const std::size_t k = pick(2, 3);
        for (std::size_t i = 0; i < k; ++i) {
            NodeId child = 0;
            bool reused = false;
            if (pick(0, 3) == 0)
                for (const auto& [sc, id] : made_)
                    if (sc == scope && std::find(s.children.begin(), s.children.end(), id) == s.children.end()) {
                        child = id;
                        reused = true;
                        break;
                    }
            if (!reused) child = budget(2) ? make(scope, depth + 1) : leaf(scope);
            s.children.push_back(child);
            s.weights.push_back(uniform(0.05, 1.0));
        }
        const double total = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
        for (double& w : s.weights) w /= total;
        return remember(scope, g_.add(s));
    }

    std::mt19937_64 rng_;
    std::size_t max_nodes_;
    SpnGraph g_;
    std::vector<std::pair<Scope, NodeId>> made_;
};

/// Evidence with each component observed, missing or upper-bounded at random.
inline Evidence random_evidence(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_real_distribution<double> value(-5.0, 5.0);
    Evidence e(n);
    for (auto& s : e) {
        switch (kind(rng)) {
            case 0: s = VariableState::observed(value(rng)); break;
            case 1: s = VariableState::missing(); break;
            default: s = VariableState::upper_bounded(value(rng)); break;
        }
    }
    return e;
}

}  // namespace spnasi::testing

#endif
