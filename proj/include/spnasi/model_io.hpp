// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_MODEL_IO_HPP
#define SPNASI_MODEL_IO_HPP

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"

#include "spnasi/common.hpp"
#include "spnasi/gmm.hpp"
#include "spnasi/spn.hpp"

// Model files are JSON documents. See docs/file_formats.md for the schema.

namespace spnasi {

inline constexpr const char* kModelMagic = "spnasi-model";
inline constexpr int kModelFormatVersion = 1;

using Json = nlohmann::ordered_json;

namespace detail {

inline Json number_strings(std::span<const double> v) {
    Json a = Json::array();
    for (double x : v) a.push_back(format_exact(x));
    return a;
}

inline double parse_number(const Json& j, const std::string& where) {
    if (!j.is_string()) fail(ErrorKind::parse, where + ": expected a decimal string");
    const auto& s = j.get_ref<const std::string&>();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) fail(ErrorKind::parse, where + ": bad number '" + s + "'");
    return v;
}

inline std::vector<double> parse_numbers(const Json& j, const std::string& where) {
    if (!j.is_array()) fail(ErrorKind::parse, where + ": expected an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(parse_number(e, where));
    return out;
}

inline std::size_t parse_index(const Json& j, const std::string& where) {
    if (!j.is_number_unsigned()) fail(ErrorKind::parse, where + ": expected a non-negative integer");
    return j.get<std::size_t>();
}

inline const Json& field(const Json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) fail(ErrorKind::parse, where + ": missing field '" + key + "'");
    return obj.at(key);
}

inline Json header(const char* kind) {
    Json doc;
    doc["magic"] = kModelMagic;
    doc["version"] = kModelFormatVersion;
    doc["kind"] = kind;
    return doc;
}

}  // namespace detail

inline std::string serialize(const SpnGraph& g) {
    Json doc = detail::header("spn");
    doc["num_variables"] = g.num_variables;
    doc["root"] = g.root;
    Json nodes = Json::array();
    for (NodeId id = 0; id < g.nodes.size(); ++id) {
        Json n;
        n["id"] = id;
        n["type"] = kind_name(g.nodes[id]);
        if (const auto* s = std::get_if<SumNode>(&g.nodes[id])) {
            n["children"] = s->children;
            n["weights"] = detail::number_strings(s->weights);
        } else if (const auto* p = std::get_if<ProductNode>(&g.nodes[id])) {
            n["children"] = p->children;
        } else {
            const auto& leaf = std::get<GaussianLeaf>(g.nodes[id]);
            n["var_indices"] = leaf.var_indices;
            n["means"] = detail::number_strings(leaf.means);
            n["variances"] = detail::number_strings(leaf.variances);
        }
        nodes.push_back(std::move(n));
    }
    doc["nodes"] = std::move(nodes);
    return doc.dump(1) + "\n";
}

inline std::string serialize(const DiagonalGmm& m) {
    Json doc = detail::header("gmm");
    doc["num_variables"] = m.num_variables();
    doc["num_components"] = m.num_components();
    doc["weights"] = detail::number_strings(m.weights);
    Json means = Json::array(), vars = Json::array();
    for (std::size_t c = 0; c < m.num_components(); ++c) {
        means.push_back(detail::number_strings(m.means.row(c)));
        vars.push_back(detail::number_strings(m.variances.row(c)));
    }
    doc["means"] = std::move(means);
    doc["variances"] = std::move(vars);
    return doc.dump(1) + "\n";
}

using Model = std::variant<SpnGraph, DiagonalGmm>;

namespace detail {

inline SpnGraph parse_spn(const Json& doc) {
    SpnGraph g;
    g.num_variables = parse_index(field(doc, "num_variables", "model"), "num_variables");
    g.root = parse_index(field(doc, "root", "model"), "root");
    const Json& nodes = field(doc, "nodes", "model");
    if (!nodes.is_array() || nodes.empty()) fail(ErrorKind::parse, "nodes: expected a non-empty array");
    g.nodes.resize(nodes.size());
    std::vector<bool> seen(nodes.size(), false);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Json& n = nodes[i];
        const std::size_t id = parse_index(field(n, "id", "node #" + std::to_string(i)), "node #" + std::to_string(i));
        const std::string where = "node " + std::to_string(id);
        if (id >= nodes.size()) fail(ErrorKind::parse, where + ": id out of range");
        if (seen[id]) fail(ErrorKind::parse, where + ": duplicate id");
        seen[id] = true;
        const Json& type = field(n, "type", where);
        if (!type.is_string()) fail(ErrorKind::parse, where + ": type must be a string");
        const auto& t = type.get_ref<const std::string&>();

        auto children = [&] {
            const Json& c = field(n, "children", where);
            if (!c.is_array()) fail(ErrorKind::parse, where + ": children must be an array");
            std::vector<NodeId> out;
            for (const auto& e : c) {
                const std::size_t child = parse_index(e, where + " children");
                if (child >= nodes.size())
                    fail(ErrorKind::parse, where + ": child " + std::to_string(child) + " does not exist");
                out.push_back(child);
            }
            return out;
        };

        if (t == "sum") {
            SumNode s{children(), parse_numbers(field(n, "weights", where), where + " weights")};
            if (s.weights.size() != s.children.size()) fail(ErrorKind::parse, where + ": weights/children mismatch");
            for (double w : s.weights)
                if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::parse, where + ": negative or non-finite weight");
            g.nodes[id] = std::move(s);
        } else if (t == "product") {
            g.nodes[id] = ProductNode{children()};
        } else if (t == "leaf") {
            GaussianLeaf leaf;
            const Json& vi = field(n, "var_indices", where);
            if (!vi.is_array()) fail(ErrorKind::parse, where + ": var_indices must be an array");
            for (const auto& e : vi) leaf.var_indices.push_back(parse_index(e, where + " var_indices"));
            leaf.means = parse_numbers(field(n, "means", where), where + " means");
            leaf.variances = parse_numbers(field(n, "variances", where), where + " variances");
            if (leaf.means.size() != leaf.var_indices.size() || leaf.variances.size() != leaf.var_indices.size())
                fail(ErrorKind::parse, where + ": leaf parameter lengths disagree");
            for (double v : leaf.variances)
                if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::parse, where + ": variance must be positive");
            g.nodes[id] = std::move(leaf);
        } else {
            fail(ErrorKind::parse, where + ": unknown node type '" + t + "'");
        }
    }
    if (g.root >= g.nodes.size()) fail(ErrorKind::parse, "root " + std::to_string(g.root) + " does not exist");
    return g;
}

inline DiagonalGmm parse_gmm(const Json& doc) {
    DiagonalGmm m;
    const std::size_t b = parse_index(field(doc, "num_variables", "model"), "num_variables");
    const std::size_t k = parse_index(field(doc, "num_components", "model"), "num_components");
    m.weights = parse_numbers(field(doc, "weights", "model"), "weights");
    if (m.weights.size() != k) fail(ErrorKind::parse, "weights: expected " + std::to_string(k) + " entries");
    auto rows = [&](const char* key) {
        const Json& a = field(doc, key, "model");
        if (!a.is_array() || a.size() != k) fail(ErrorKind::parse, std::string(key) + ": expected K rows");
        Matrix out(k, b);
        for (std::size_t c = 0; c < k; ++c) {
            const auto r = parse_numbers(a[c], std::string(key) + " row " + std::to_string(c));
            if (r.size() != b) fail(ErrorKind::parse, std::string(key) + " row " + std::to_string(c) + ": expected B values");
            std::ranges::copy(r, out.row(c).begin());
        }
        return out;
    };
    m.means = rows("means");
    m.variances = rows("variances");
    try {
        check_gmm(m);
    } catch (const Error& e) {
        fail(ErrorKind::parse, e.what());
    }
    return m;
}

}  // namespace detail

/// Parses either model kind; throws ErrorKind::parse with the offending
/// field or node id on any malformed input.
inline Model deserialize(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("malformed model document: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorKind::parse, "model document must be an object");
    const Json& magic = detail::field(doc, "magic", "model");
    if (!magic.is_string() || magic.get<std::string>() != kModelMagic)
        fail(ErrorKind::parse, "not a spnasi model file (bad magic)");
    const Json& version = detail::field(doc, "version", "model");
    if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion)
        fail(ErrorKind::parse, "unsupported model format version " + version.dump());
    const Json& kind = detail::field(doc, "kind", "model");
    if (kind == "spn") return detail::parse_spn(doc);
    if (kind == "gmm") return detail::parse_gmm(doc);
    fail(ErrorKind::parse, "unknown model kind " + kind.dump());
}

inline SpnGraph deserialize_spn(std::string_view text) {
    auto m = deserialize(text);
    if (auto* g = std::get_if<SpnGraph>(&m)) return std::move(*g);
    fail(ErrorKind::parse, "model file holds a GMM, expected an SPN");
}

inline DiagonalGmm deserialize_gmm(std::string_view text) {
    auto m = deserialize(text);
    if (auto* g = std::get_if<DiagonalGmm>(&m)) return std::move(*g);
    fail(ErrorKind::parse, "model file holds an SPN, expected a GMM");
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path);
    out << text;
    if (!out) fail(ErrorKind::io, "write failed: " + path);
}

inline Model load_model(const std::string& path) { return deserialize(read_text_file(path)); }

}  // namespace spnasi

#endif
