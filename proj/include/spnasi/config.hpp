// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_CONFIG_HPP
#define SPNASI_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "spnasi/audio_io.hpp"
#include "spnasi/common.hpp"
#include "spnasi/harness.hpp"
#include "spnasi/model_io.hpp"
#include "spnasi/synth.hpp"

// Resolved configuration for the command-line tool. Values come from
// defaults, then an optional JSON config file, then command-line flags.
//
// Config file layout:
//   { "seed": 7,
//     "frames": {"frame_len": 512, ...},
//     "learn": {"min_instances_to_split": 50, ...},
//     "em": {"num_components": 48, ...},
//     "experiment": {"snr_levels_db": [-5, 0, 5], "noise": ["synthetic:bursts"], ...} }

namespace spnasi {

struct CliConfig {
    ExperimentConfig experiment;
    // Noise references: WAV paths or "synthetic:<name>".
    std::vector<std::string> noise{"synthetic:bursts", "synthetic:colored"};
};

namespace detail {

struct Param {
    std::string key;  // "section.name", or "seed"
    bool list = false;
    std::function<void(CliConfig&, const Json&)> set;
    std::function<std::string(const CliConfig&)> show;
};

[[noreturn]] inline void bad_value(const std::string& key, const std::string& why) {
    fail(ErrorKind::usage, "invalid value for " + key + ": " + why);
}

inline std::size_t as_size(const Json& j, const std::string& key) {
    if (j.is_number_unsigned()) return j.get<std::size_t>();
    if (j.is_number_integer() && j.get<long long>() >= 0) return j.get<std::size_t>();
    if (j.is_number_float()) {
        const double d = j.get<double>();
        if (d >= 0.0 && d == std::floor(d) && d < 9.0e15) return static_cast<std::size_t>(d);
    }
    bad_value(key, "expected a non-negative integer, got " + j.dump());
}

inline std::uint64_t as_u64(const Json& j, const std::string& key) {
    if (j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0)) return j.get<std::uint64_t>();
    bad_value(key, "expected a non-negative integer, got " + j.dump());
}

inline double as_double(const Json& j, const std::string& key) {
    if (!j.is_number()) bad_value(key, "expected a number, got " + j.dump());
    const double d = j.get<double>();
    if (!std::isfinite(d)) bad_value(key, "must be finite");
    return d;
}

inline bool as_bool(const Json& j, const std::string& key) {
    if (!j.is_boolean()) bad_value(key, "expected true or false, got " + j.dump());
    return j.get<bool>();
}

inline std::string as_string(const Json& j, const std::string& key) {
    if (!j.is_string()) bad_value(key, "expected a string, got " + j.dump());
    return j.get<std::string>();
}

inline const Json& as_list(const Json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) bad_value(key, "expected a non-empty list");
    return j;
}

inline std::string show_double(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
    return out;
}

inline ModelFamily parse_family(const std::string& s, const std::string& key) {
    if (s == "spn") return ModelFamily::spn;
    if (s == "gmm") return ModelFamily::gmm;
    bad_value(key, "unknown model family '" + s + "' (spn, gmm)");
}

inline MarginalMode parse_mode(const std::string& s, const std::string& key) {
    if (s == "none") return MarginalMode::none;
    if (s == "marginal") return MarginalMode::marginal;
    if (s == "bounded") return MarginalMode::bounded;
    bad_value(key, "unknown mode '" + s + "' (none, marginal, bounded)");
}

#define SPNASI_SIZE(k, field) \
    Param{k, false, [](CliConfig& c, const Json& j) { c.field = as_size(j, k); }, \
          [](const CliConfig& c) { return std::to_string(c.field); }}
#define SPNASI_DOUBLE(k, field) \
    Param{k, false, [](CliConfig& c, const Json& j) { c.field = as_double(j, k); }, \
          [](const CliConfig& c) { return show_double(c.field); }}

inline const std::vector<Param>& params() {
    static const std::vector<Param> table = {
        Param{"seed", false, [](CliConfig& c, const Json& j) { c.experiment.seed = as_u64(j, "seed"); },
              [](const CliConfig& c) { return std::to_string(c.experiment.seed); }},
        SPNASI_SIZE("frames.sample_rate", experiment.frames.sample_rate),
        SPNASI_SIZE("frames.frame_len", experiment.frames.frame_len),
        SPNASI_SIZE("frames.frame_shift", experiment.frames.frame_shift),
        SPNASI_SIZE("frames.num_bands", experiment.frames.num_bands),
        SPNASI_SIZE("learn.min_instances_to_split", experiment.learn.min_instances_to_split),
        SPNASI_DOUBLE("learn.independence_threshold", experiment.learn.independence_threshold),
        SPNASI_SIZE("learn.rdc_num_features", experiment.learn.rdc_num_features),
        SPNASI_DOUBLE("learn.rdc_scale", experiment.learn.rdc_scale),
        SPNASI_SIZE("learn.cluster_k", experiment.learn.cluster_k),
        SPNASI_SIZE("learn.kmeans_max_iter", experiment.learn.kmeans_max_iter),
        SPNASI_SIZE("em.num_components", experiment.em.num_components),
        SPNASI_SIZE("em.max_iter", experiment.em.max_iter),
        SPNASI_DOUBLE("em.tol", experiment.em.tol),
        Param{"experiment.model_families", true,
              [](CliConfig& c, const Json& j) {
                  const char* k = "experiment.model_families";
                  c.experiment.model_families.clear();
                  for (const auto& e : as_list(j, k)) c.experiment.model_families.push_back(parse_family(as_string(e, k), k));
              },
              [](const CliConfig& c) {
                  return join(c.experiment.model_families, [](ModelFamily f) { return std::string(to_string(f)); });
              }},
        Param{"experiment.modes", true,
              [](CliConfig& c, const Json& j) {
                  const char* k = "experiment.modes";
                  c.experiment.modes.clear();
                  for (const auto& e : as_list(j, k)) c.experiment.modes.push_back(parse_mode(as_string(e, k), k));
              },
              [](const CliConfig& c) {
                  return join(c.experiment.modes, [](MarginalMode m) { return std::string(to_string(m)); });
              }},
        Param{"experiment.snr_levels_db", true,
              [](CliConfig& c, const Json& j) {
                  const char* k = "experiment.snr_levels_db";
                  c.experiment.snr_levels_db.clear();
                  for (const auto& e : as_list(j, k)) c.experiment.snr_levels_db.push_back(as_double(e, k));
              },
              [](const CliConfig& c) { return join(c.experiment.snr_levels_db, show_double); }},
        Param{"experiment.noise", true,
              [](CliConfig& c, const Json& j) {
                  const char* k = "experiment.noise";
                  c.noise.clear();
                  for (const auto& e : as_list(j, k)) c.noise.push_back(as_string(e, k));
              },
              [](const CliConfig& c) { return join(c.noise, [](const std::string& s) { return s; }); }},
        Param{"experiment.masker", false,
              [](CliConfig& c, const Json& j) {
                  const auto s = as_string(j, "experiment.masker");
                  if (s != "oracle") bad_value("experiment.masker", "only 'oracle' is supported");
                  c.experiment.masker = s;
              },
              [](const CliConfig& c) { return c.experiment.masker; }},
        Param{"experiment.snr_aggregation", false,
              [](CliConfig& c, const Json& j) {
                  const auto s = as_string(j, "experiment.snr_aggregation");
                  if (s == "mean_xi") c.experiment.snr_aggregation = SnrAggregation::mean_xi;
                  else if (s == "psd_ratio") c.experiment.snr_aggregation = SnrAggregation::psd_ratio;
                  else bad_value("experiment.snr_aggregation", "expected mean_xi or psd_ratio");
              },
              [](const CliConfig& c) { return std::string(to_string(c.experiment.snr_aggregation)); }},
        SPNASI_DOUBLE("experiment.reliability_threshold_db", experiment.reliability_threshold_db),
        Param{"experiment.include_clean", false,
              [](CliConfig& c, const Json& j) { c.experiment.include_clean = as_bool(j, "experiment.include_clean"); },
              [](const CliConfig& c) { return std::string(c.experiment.include_clean ? "true" : "false"); }},
        SPNASI_SIZE("experiment.threads", experiment.threads),
    };
    return table;
}

#undef SPNASI_SIZE
#undef SPNASI_DOUBLE

inline const Param& find_param(const std::string& key) {
    for (const auto& p : params())
        if (p.key == key) return p;
    fail(ErrorKind::usage, "unknown configuration key: " + key);
}

// Flag text to JSON: numbers and booleans as such, anything else a string.
inline Json scalar_from_text(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    try {
        std::size_t used = 0;
        if (s.find_first_of(".eE") == std::string::npos && s.find('-') == std::string::npos) {
            const auto v = std::stoull(s, &used);
            if (used == s.size()) return v;
        }
        used = 0;
        const double d = std::stod(s, &used);
        if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
    return s;
}

}  // namespace detail

/// Sets one parameter from command-line text. List values are comma separated.
inline void set_param(CliConfig& c, const std::string& key, const std::string& text) {
    const auto& p = detail::find_param(key);
    Json j;
    if (p.list) {
        j = Json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) detail::bad_value(key, "empty list element");
            j.push_back(detail::scalar_from_text(item));
        }
    } else {
        j = detail::scalar_from_text(text);
    }
    p.set(c, j);
}

/// Applies "key=value".
inline void apply_assignment(CliConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::usage, "expected key=value, got '" + assignment + "'");
    set_param(c, assignment.substr(0, eq), assignment.substr(eq + 1));
}

/// Applies a parsed config document. Unknown sections or keys are rejected.
inline void apply_config_json(CliConfig& c, const Json& doc) {
    if (!doc.is_object()) fail(ErrorKind::usage, "config file must hold a JSON object");
    for (const auto& [section, body] : doc.items()) {
        if (section == "seed") {
            detail::find_param("seed").set(c, body);
            continue;
        }
        const bool known = std::ranges::any_of(detail::params(), [&](const detail::Param& p) {
            return p.key.size() > section.size() && p.key.compare(0, section.size() + 1, section + ".") == 0;
        });
        if (!known || !body.is_object()) fail(ErrorKind::usage, "unknown configuration key: " + section);
        for (const auto& [key, value] : body.items()) detail::find_param(section + "." + key).set(c, value);
    }
}

inline void apply_config_file(CliConfig& c, const std::string& path) {
    const auto text = read_text_file(path);
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::usage, path + ": malformed config file: " + e.what());
    }
    apply_config_json(c, doc);
}

/// Cross-field checks, reported as usage errors.
inline void check_config(const CliConfig& c) {
    try {
        check_frame_params(c.experiment.frames);
        check_learn_params(c.experiment.learn);
    } catch (const Error& e) {
        fail(ErrorKind::usage, e.what());
    }
    if (c.experiment.em.num_components == 0) fail(ErrorKind::usage, "em.num_components must be positive");
    if (c.experiment.em.max_iter == 0) fail(ErrorKind::usage, "em.max_iter must be positive");
    if (!(c.experiment.em.tol >= 0.0)) fail(ErrorKind::usage, "em.tol must be non-negative");
    if (c.experiment.frames.sample_rate != 16000) fail(ErrorKind::usage, "frames.sample_rate must be 16000");
}

/// One "key=value" line per parameter.
inline std::string show_config(const CliConfig& c) {
    std::string out;
    for (const auto& p : detail::params()) out += p.key + "=" + p.show(c) + "\n";
    return out;
}

/// Loads the noise recordings named in the config.
inline std::vector<NoiseSource> resolve_noise(const CliConfig& c, double synthetic_seconds = 12.0) {
    std::vector<NoiseSource> out;
    const std::uint64_t seed = derive_seed(c.experiment.seed, "noise");
    for (const auto& ref : c.noise) {
        if (ref.rfind("synthetic:", 0) == 0) {
            const auto name = ref.substr(10);
            if (name == "bursts") out.push_back({name, synthesize_burst_noise(synthetic_seconds, derive_seed(seed, name))});
            else if (name == "colored")
                out.push_back({name, synthesize_colored_noise(synthetic_seconds, derive_seed(seed, name))});
            else if (name == "babble")
                out.push_back({name, synthesize_babble_noise(synthetic_seconds, derive_seed(seed, name))});
            else fail(ErrorKind::usage, "unknown synthetic noise '" + name + "' (bursts, colored, babble)");
        } else {
            out.push_back({std::filesystem::path(ref).stem().string(), read_wav(ref).samples});
        }
    }
    return out;
}

}  // namespace spnasi

#endif
