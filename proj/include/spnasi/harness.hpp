// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_HARNESS_HPP
#define SPNASI_HARNESS_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "spnasi/audio_io.hpp"
#include "spnasi/common.hpp"
#include "spnasi/dsp.hpp"
#include "spnasi/gmm.hpp"
#include "spnasi/learn_spn.hpp"
#include "spnasi/model_io.hpp"
#include "spnasi/reliability.hpp"
#include "spnasi/spn.hpp"
#include "spnasi/synth.hpp"

namespace spnasi {

enum class ModelFamily { spn, gmm };

inline std::string_view to_string(ModelFamily f) { return f == ModelFamily::spn ? "spn" : "gmm"; }

struct ExperimentConfig {
    std::vector<ModelFamily> model_families{ModelFamily::spn, ModelFamily::gmm};
    std::vector<MarginalMode> modes{MarginalMode::none, MarginalMode::marginal, MarginalMode::bounded};
    std::vector<double> snr_levels_db{-5.0, 0.0, 5.0, 10.0, 15.0};
    std::vector<NoiseSource> noise_sources;
    std::string masker = "oracle";
    SnrAggregation snr_aggregation = SnrAggregation::mean_xi;
    double reliability_threshold_db = 0.0;
    bool include_clean = true;
    FrameParams frames;
    LearnParams learn;
    EmParams em;
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0: hardware concurrency
};

/// A trained speaker model of either family.
class SpeakerModel {
public:
    explicit SpeakerModel(Spn spn) : model_(std::move(spn)) {}
    explicit SpeakerModel(DiagonalGmm gmm) : model_(std::move(gmm)) { check_gmm(std::get<DiagonalGmm>(model_)); }

    ModelFamily family() const { return model_.index() == 0 ? ModelFamily::spn : ModelFamily::gmm; }

    double log_density(const Evidence& e, std::vector<double>& scratch) const {
        if (const auto* s = std::get_if<Spn>(&model_)) return s->log_density(e, scratch);
        return gmm_log_density(std::get<DiagonalGmm>(model_), e);
    }

    std::size_t num_variables() const {
        if (const auto* s = std::get_if<Spn>(&model_)) return s->num_variables();
        return std::get<DiagonalGmm>(model_).num_variables();
    }

    std::size_t parameter_count() const {
        if (const auto* s = std::get_if<Spn>(&model_)) return spnasi::parameter_count(s->graph());
        return gmm_parameter_count(std::get<DiagonalGmm>(model_));
    }

    std::string serialize() const {
        if (const auto* s = std::get_if<Spn>(&model_)) return spnasi::serialize(s->graph());
        return spnasi::serialize(std::get<DiagonalGmm>(model_));
    }

    static SpeakerModel from_model(Model m) {
        if (auto* g = std::get_if<SpnGraph>(&m)) return SpeakerModel(Spn::make(std::move(*g)));
        return SpeakerModel(std::move(std::get<DiagonalGmm>(m)));
    }

private:
    std::variant<Spn, DiagonalGmm> model_;
};

/// Enrolled models keyed and ordered by speaker id.
using SpeakerModels = std::vector<std::pair<std::string, SpeakerModel>>;

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into per-index slots.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += threads) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline Matrix training_matrix(const SpeakerData& spk, const FeatureExtractor& fx) {
    Matrix data;
    for (const auto& u : spk.train)
        if (!u.samples.empty()) data.append_rows(fx(u.samples));
    return data;
}

inline SpeakerModel train_speaker_model(const Matrix& data, ModelFamily family, const ExperimentConfig& cfg,
                                        std::uint64_t seed) {
    if (family == ModelFamily::spn) {
        LearnParams p = cfg.learn;
        p.seed = seed;
        return SpeakerModel(Spn::make(normalize_weights(learn_spn(data, p))));
    }
    EmParams p = cfg.em;
    p.seed = seed;
    return SpeakerModel(fit_em(data, p).model);
}

/// One model per speaker from the concatenated training features.
inline SpeakerModels train_speaker_models(const Corpus& corpus, ModelFamily family, const ExperimentConfig& cfg) {
    const FeatureExtractor fx(cfg.frames);
    std::vector<std::optional<SpeakerModel>> slots(corpus.speakers.size());
    parallel_for(corpus.speakers.size(), cfg.threads, [&](std::size_t i) {
        const auto& spk = corpus.speakers[i];
        const Matrix data = training_matrix(spk, fx);
        if (data.rows() == 0) fail(ErrorKind::training, "speaker " + spk.id + " has no usable training frames");
        const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, to_string(family)), spk.id);
        try {
            slots[i].emplace(train_speaker_model(data, family, cfg, seed));
        } catch (const Error& e) {
            fail(ErrorKind::training, "speaker " + spk.id + ": " + e.what());
        }
    });
    SpeakerModels out;
    for (std::size_t i = 0; i < slots.size(); ++i) out.emplace_back(corpus.speakers[i].id, std::move(*slots[i]));
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

/// Sum of frame log-densities.
inline double score_utterance(const SpeakerModel& model, const std::vector<Evidence>& frames) {
    std::vector<double> scratch;
    double acc = 0.0;
    for (const auto& e : frames) {
        if (e.size() != model.num_variables()) fail(ErrorKind::input, "score_utterance: frame dimension mismatch");
        acc += model.log_density(e, scratch);
    }
    return acc;
}

/// Index of the best-scoring model; ties go to the lower index (models are
/// kept sorted by id).
inline std::size_t identify_index(const SpeakerModels& models, const std::vector<Evidence>& frames) {
    if (models.empty()) fail(ErrorKind::input, "identify: no enrolled models");
    std::size_t best = 0;
    double best_score = score_utterance(models[0].second, frames);
    for (std::size_t i = 1; i < models.size(); ++i) {
        const double s = score_utterance(models[i].second, frames);
        if (s > best_score || (std::isnan(best_score) && !std::isnan(s))) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

inline std::string identify(const SpeakerModels& models, const std::vector<Evidence>& frames) {
    return models[identify_index(models, frames)].first;
}

struct Cell {
    std::string noise;
    double snr_db = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    std::optional<std::string> failure;

    double accuracy() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }
};

struct ResultRow {
    ModelFamily family = ModelFamily::spn;
    MarginalMode mode = MarginalMode::none;
    std::vector<Cell> cells;  // noise-major, then SNR in config order
    std::optional<Cell> clean;

    double average_accuracy() const {
        double acc = 0.0;
        std::size_t n = 0;
        for (const auto& c : cells)
            if (!c.failure) {
                acc += c.accuracy();
                ++n;
            }
        return n == 0 ? 0.0 : acc / static_cast<double>(n);
    }

    const Cell* find(std::string_view noise, double snr) const {
        for (const auto& c : cells)
            if (c.noise == noise && c.snr_db == snr) return &c;
        return nullptr;
    }
};

struct ParameterSummary {
    ModelFamily family = ModelFamily::spn;
    std::vector<std::pair<std::string, std::size_t>> per_speaker;

    double average() const {
        double acc = 0.0;
        for (const auto& p : per_speaker) acc += static_cast<double>(p.second);
        return per_speaker.empty() ? 0.0 : acc / static_cast<double>(per_speaker.size());
    }
};

struct ResultsTable {
    std::vector<ResultRow> rows;
    std::vector<ParameterSummary> parameters;
    std::size_t test_utterances = 0;

    const ResultRow* row(ModelFamily f, MarginalMode m) const {
        for (const auto& r : rows)
            if (r.family == f && r.mode == m) return &r;
        return nullptr;
    }
};

namespace detail {

inline std::vector<const Utterance*> test_set(const Corpus& corpus, std::vector<std::size_t>& truth) {
    std::vector<const Utterance*> out;
    for (std::size_t s = 0; s < corpus.speakers.size(); ++s)
        for (const auto& u : corpus.speakers[s].test) {
            out.push_back(&u);
            truth.push_back(s);
        }
    return out;
}

}  // namespace detail

/// The noise x SNR x mode identification grid. `trained` maps each family to
/// its enrolled models; families missing from it are trained here.
inline ResultsTable run_experiment(const Corpus& corpus, const ExperimentConfig& cfg,
                                   std::map<ModelFamily, SpeakerModels> trained = {}) {
    if (corpus.speakers.size() < 2) fail(ErrorKind::input, "experiment needs at least 2 speakers");
    if (cfg.modes.empty() || cfg.model_families.empty()) fail(ErrorKind::input, "experiment needs modes and model families");
    if (cfg.masker != "oracle") fail(ErrorKind::input, "unknown masker '" + cfg.masker + "'");
    for (const auto& s : corpus.speakers)
        if (s.train.empty() || s.test.empty())
            fail(ErrorKind::input, "speaker " + s.id + " needs training and test utterances");

    // Models are listed in id order; truth indices must follow the same order.
    Corpus sorted = corpus;
    std::stable_sort(sorted.speakers.begin(), sorted.speakers.end(),
                     [](const auto& a, const auto& b) { return a.id < b.id; });

    for (ModelFamily f : cfg.model_families)
        if (!trained.contains(f)) trained.emplace(f, train_speaker_models(sorted, f, cfg));

    const FeatureExtractor fx(cfg.frames);
    std::vector<std::size_t> truth;
    const auto tests = detail::test_set(sorted, truth);

    ResultsTable table;
    table.test_utterances = tests.size();
    for (ModelFamily f : cfg.model_families) {
        ParameterSummary ps{f, {}};
        for (const auto& [id, m] : trained.at(f)) ps.per_speaker.emplace_back(id, m.parameter_count());
        table.parameters.push_back(std::move(ps));
        for (MarginalMode mode : cfg.modes) table.rows.push_back({f, mode, {}, std::nullopt});
    }
    auto row_index = [&](std::size_t fi, std::size_t mi) { return fi * cfg.modes.size() + mi; };

    // hits[u][row] for one condition; filled per utterance, reduced afterwards.
    auto run_condition = [&](const std::function<std::pair<Matrix, ReliabilityMask>(std::size_t)>& prepare) {
        std::vector<std::vector<unsigned char>> hits(tests.size());
        parallel_for(tests.size(), cfg.threads, [&](std::size_t u) {
            const auto [features, mask] = prepare(u);
            hits[u].assign(table.rows.size(), 0);
            for (std::size_t mi = 0; mi < cfg.modes.size(); ++mi) {
                const auto evidence = build_evidence(features, mask, cfg.modes[mi]);
                for (std::size_t fi = 0; fi < cfg.model_families.size(); ++fi) {
                    const auto& models = trained.at(cfg.model_families[fi]);
                    hits[u][row_index(fi, mi)] = identify_index(models, evidence) == truth[u] ? 1 : 0;
                }
            }
        });
        std::vector<std::size_t> correct(table.rows.size(), 0);
        for (const auto& h : hits)
            for (std::size_t r = 0; r < h.size(); ++r) correct[r] += h[r];
        return correct;
    };

    if (cfg.include_clean) {
        const auto correct = run_condition([&](std::size_t u) {
            Matrix f = fx(tests[u]->samples);
            ReliabilityMask m = all_reliable(f.rows(), f.cols());
            return std::pair{std::move(f), std::move(m)};
        });
        for (std::size_t r = 0; r < table.rows.size(); ++r)
            table.rows[r].clean = Cell{"clean", 0.0, correct[r], tests.size(), std::nullopt};
    }

    for (std::size_t ni = 0; ni < cfg.noise_sources.size(); ++ni) {
        const auto& noise = cfg.noise_sources[ni];
        for (double snr : cfg.snr_levels_db) {
            std::vector<Cell> cells(table.rows.size(), Cell{noise.name, snr, 0, tests.size(), std::nullopt});
            try {
                const auto correct = run_condition([&](std::size_t u) {
                    MixSpec spec;
                    spec.snr_db = snr;
                    // Offset depends on the utterance and noise only, so every SNR
                    // level reuses the same excerpt.
                    spec.seed = derive_seed(derive_seed(cfg.seed, "offset"), ni * 1000003 + u);
                    const auto mix = mix_at_snr(tests[u]->samples, noise.samples, spec);
                    Matrix f = fx(mix.noisy);
                    ReliabilityMask m = oracle_mask(tests[u]->samples, mix.scaled_noise, fx, cfg.snr_aggregation,
                                                    cfg.reliability_threshold_db);
                    return std::pair{std::move(f), std::move(m)};
                });
                for (std::size_t r = 0; r < cells.size(); ++r) cells[r].correct = correct[r];
            } catch (const Error& e) {
                for (auto& c : cells) {
                    c.failure = e.what();
                    c.correct = 0;
                }
            }
            for (std::size_t r = 0; r < cells.size(); ++r) table.rows[r].cells.push_back(cells[r]);
        }
    }
    return table;
}

// Reports --------------------------------------------------------------------

inline Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    Json fam = Json::array(), modes = Json::array(), snrs = Json::array(), noises = Json::array();
    for (auto f : cfg.model_families) fam.push_back(to_string(f));
    for (auto m : cfg.modes) modes.push_back(to_string(m));
    for (double s : cfg.snr_levels_db) snrs.push_back(s);
    for (const auto& n : cfg.noise_sources) noises.push_back(n.name);
    j["model_families"] = fam;
    j["modes"] = modes;
    j["snr_levels_db"] = snrs;
    j["noise_sources"] = noises;
    j["masker"] = cfg.masker;
    j["snr_aggregation"] = to_string(cfg.snr_aggregation);
    j["reliability_threshold_db"] = cfg.reliability_threshold_db;
    j["include_clean"] = cfg.include_clean;
    j["frames"] = {{"sample_rate", cfg.frames.sample_rate},
                   {"frame_len", cfg.frames.frame_len},
                   {"frame_shift", cfg.frames.frame_shift},
                   {"num_bands", cfg.frames.num_bands}};
    j["learn"] = {{"min_instances_to_split", cfg.learn.min_instances_to_split},
                  {"independence_threshold", cfg.learn.independence_threshold},
                  {"rdc_num_features", cfg.learn.rdc_num_features},
                  {"rdc_scale", cfg.learn.rdc_scale},
                  {"cluster_k", cfg.learn.cluster_k},
                  {"kmeans_max_iter", cfg.learn.kmeans_max_iter}};
    j["em"] = {{"num_components", cfg.em.num_components}, {"max_iter", cfg.em.max_iter}, {"tol", cfg.em.tol}};
    j["seed"] = cfg.seed;
    return j;
}

inline std::string report_json(const ResultsTable& t, const ExperimentConfig& cfg) {
    Json doc;
    doc["magic"] = "spnasi-report";
    doc["version"] = 1;
    doc["config"] = config_to_json(cfg);
    doc["test_utterances"] = t.test_utterances;
    Json rows = Json::array();
    auto cell_json = [](const Cell& c) {
        Json j;
        j["noise"] = c.noise;
        j["snr_db"] = c.snr_db;
        j["correct"] = c.correct;
        j["total"] = c.total;
        if (c.failure) j["failure"] = *c.failure;
        else j["accuracy"] = c.accuracy();
        return j;
    };
    for (const auto& r : t.rows) {
        Json jr;
        jr["model"] = to_string(r.family);
        jr["mode"] = to_string(r.mode);
        if (r.clean) jr["clean"] = cell_json(*r.clean);
        Json cells = Json::array();
        for (const auto& c : r.cells) cells.push_back(cell_json(c));
        jr["cells"] = std::move(cells);
        jr["average_accuracy"] = r.average_accuracy();
        rows.push_back(std::move(jr));
    }
    doc["rows"] = std::move(rows);
    Json params = Json::array();
    for (const auto& p : t.parameters) {
        Json jp;
        jp["model"] = to_string(p.family);
        jp["average"] = p.average();
        Json per = Json::object();
        for (const auto& [id, n] : p.per_speaker) per[id] = n;
        jp["per_speaker"] = std::move(per);
        params.push_back(std::move(jp));
    }
    doc["parameters_per_speaker"] = std::move(params);
    return doc.dump(2) + "\n";
}

inline std::string report_csv(const ResultsTable& t) {
    std::ostringstream out;
    out << "model,mode,noise,snr_db,correct,total,accuracy,failure\n";
    auto line = [&](const ResultRow& r, const Cell& c, const std::string& snr) {
        out << to_string(r.family) << ',' << to_string(r.mode) << ',' << c.noise << ',' << snr << ',' << c.correct
            << ',' << c.total << ',';
        if (c.failure) out << ",\"" << *c.failure << "\"\n";
        else out << format_exact(c.accuracy()) << ",\n";
    };
    for (const auto& r : t.rows) {
        if (r.clean) line(r, *r.clean, "");
        for (const auto& c : r.cells) line(r, c, format_exact(c.snr_db));
    }
    return out.str();
}

/// Human-readable accuracy table: one row per (model, mode), one column
/// group per noise source.
inline std::string render_table(const ResultsTable& t, const ExperimentConfig& cfg) {
    std::ostringstream out;
    char buf[64];
    out << "ASI accuracy (%)\n";
    out << "model  mode      ";
    if (cfg.include_clean) out << " | clean ";
    for (const auto& n : cfg.noise_sources) {
        out << " | " << n.name << ":";
        for (double s : cfg.snr_levels_db) {
            std::snprintf(buf, sizeof buf, " %6g", s);
            out << buf;
        }
    }
    out << " | avg\n";
    for (const auto& r : t.rows) {
        std::snprintf(buf, sizeof buf, "%-6s %-9s", std::string(to_string(r.family)).c_str(),
                      std::string(to_string(r.mode)).c_str());
        out << buf;
        if (r.clean) {
            std::snprintf(buf, sizeof buf, " | %6.2f", r.clean->accuracy());
            out << buf;
        }
        std::size_t i = 0;
        for (const auto& n : cfg.noise_sources) {
            out << " | " << std::string(n.name.size() + 1, ' ');
            for (std::size_t s = 0; s < cfg.snr_levels_db.size(); ++s, ++i) {
                const auto& c = r.cells[i];
                if (c.failure) out << "   FAIL";
                else {
                    std::snprintf(buf, sizeof buf, " %6.2f", c.accuracy());
                    out << buf;
                }
            }
        }
        std::snprintf(buf, sizeof buf, " | %6.2f\n", r.average_accuracy());
        out << buf;
    }
    out << "\nParameters per speaker (average)\n";
    for (const auto& p : t.parameters) {
        std::snprintf(buf, sizeof buf, "%-6s %.1f\n", std::string(to_string(p.family)).c_str(), p.average());
        out << buf;
    }
    return out.str();
}

// Corpus on disk: <root>/<speaker_id>/{train,test}/*.wav --------------------

inline Corpus load_corpus(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) fail(ErrorKind::io, "corpus directory not found: " + root);
    Corpus c;
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    auto load_split = [](const fs::path& dir) {
        std::vector<Utterance> out;
        if (!fs::is_directory(dir)) return out;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto w = read_wav(f.string());
            out.push_back({f.stem().string(), std::move(w.samples), w.sample_rate});
        }
        return out;
    };
    for (const auto& d : dirs) {
        SpeakerData s{d.filename().string(), load_split(d / "train"), load_split(d / "test")};
        if (s.train.empty() && s.test.empty()) continue;
        c.speakers.push_back(std::move(s));
    }
    if (c.speakers.size() < 2) fail(ErrorKind::input, "corpus at " + root + " has fewer than 2 speakers");
    return c;
}

inline void save_corpus(const Corpus& c, const std::string& root) {
    namespace fs = std::filesystem;
    for (const auto& s : c.speakers) {
        for (const auto& [split, utts] : {std::pair{"train", &s.train}, std::pair{"test", &s.test}}) {
            const fs::path dir = fs::path(root) / s.id / split;
            fs::create_directories(dir);
            for (const auto& u : *utts) write_wav((dir / (u.name + ".wav")).string(), {u.samples, u.sample_rate});
        }
    }
}

}  // namespace spnasi

#endif
