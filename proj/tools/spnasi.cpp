// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

// spnasi: feature extraction, noise mixing, model training, evaluation and
// model inspection from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spnasi/audio_io.hpp"
#include "spnasi/config.hpp"
#include "spnasi/dsp.hpp"
#include "spnasi/harness.hpp"
#include "spnasi/model_io.hpp"
#include "spnasi/reliability.hpp"
#include "spnasi/synth.hpp"

namespace fs = std::filesystem;
using namespace spnasi;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kIo = 3, kData = 4, kModel = 5 };

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::usage: return kUsage;
        case ErrorKind::io: return kIo;
        case ErrorKind::structural: return kModel;
        default: return kData;
    }
}

struct Options {
    std::string config_file;
    std::vector<std::string> assignments;
    std::optional<std::uint64_t> seed;
    bool show_config = false;

    // features / mix
    std::string in, out, csv, clean, noise_wav, mask;
    double snr = 0.0;
    std::optional<std::size_t> noise_offset;

    // train / evaluate
    std::string corpus, models_dir, save_models;
    std::vector<std::string> noise;
    std::string snrs, modes, families;

    // inspect
    std::string model;

    // synth-corpus
    std::size_t speakers = 10, utterances = 6, test_utterances = 0;
    double seconds = 2.0;
    std::string noise_out;
};

CliConfig resolve(const Options& o) {
    CliConfig c;
    if (!o.config_file.empty()) apply_config_file(c, o.config_file);
    for (const auto& a : o.assignments) apply_assignment(c, a);
    if (o.seed) c.experiment.seed = *o.seed;
    if (!o.snrs.empty()) set_param(c, "experiment.snr_levels_db", o.snrs);
    if (!o.modes.empty()) set_param(c, "experiment.modes", o.modes);
    if (!o.families.empty()) set_param(c, "experiment.model_families", o.families);
    if (!o.noise.empty()) c.noise = o.noise;
    check_config(c);
    return c;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) fail(ErrorKind::usage, std::string(flag) + " is required");
}

void write_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write " + path);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_exact(m(r, c));
        out << '\n';
    }
}

int cmd_features(const Options& o, const CliConfig& c) {
    require(o.in, "--in");
    require(o.out, "--out");
    const auto w = read_wav(o.in);
    const Matrix f = FeatureExtractor(c.experiment.frames)(w.samples);
    write_feature_matrix(o.out, f);
    if (!o.csv.empty()) write_csv(o.csv, f);
    std::printf("%zu frames x %zu bands -> %s\n", f.rows(), f.cols(), o.out.c_str());
    return kOk;
}

int cmd_mix(const Options& o, const CliConfig& c) {
    require(o.clean, "--clean");
    require(o.noise_wav, "--noise");
    require(o.out, "--out");
    const auto clean = read_wav(o.clean);
    const auto noise = read_wav(o.noise_wav);
    MixSpec spec;
    spec.snr_db = o.snr;
    spec.noise_offset = o.noise_offset;
    spec.seed = derive_seed(c.experiment.seed, "mix");
    const auto m = mix_at_snr(clean.samples, noise.samples, spec);
    write_wav(o.out, {m.noisy, clean.sample_rate});
    if (!o.mask.empty()) {
        const FeatureExtractor fx(c.experiment.frames);
        write_mask(o.mask, oracle_mask(clean.samples, m.scaled_noise, fx, c.experiment.snr_aggregation,
                                       c.experiment.reliability_threshold_db));
    }
    std::printf("gain=%.17g offset=%zu snr_db=%.10g\n", m.gain, m.noise_offset, snr_db_of(clean.samples, m.scaled_noise));
    return kOk;
}

std::string model_path(const std::string& dir, const std::string& speaker, ModelFamily f) {
    return (fs::path(dir) / (speaker + "." + std::string(to_string(f)) + ".json")).string();
}

void save_models(const std::string& dir, ModelFamily f, const SpeakerModels& models) {
    fs::create_directories(dir);
    for (const auto& [id, m] : models) write_text_file(model_path(dir, id, f), m.serialize());
}

SpeakerModels load_models(const std::string& dir, ModelFamily f, const Corpus& corpus) {
    SpeakerModels out;
    for (const auto& s : corpus.speakers) out.emplace_back(s.id, SpeakerModel::from_model(load_model(model_path(dir, s.id, f))));
    return out;
}

int cmd_train(const Options& o, CliConfig c) {
    require(o.corpus, "--corpus");
    require(o.out, "--out");
    const auto corpus = load_corpus(o.corpus);
    for (ModelFamily f : c.experiment.model_families) {
        const auto models = train_speaker_models(corpus, f, c.experiment);
        save_models(o.out, f, models);
        std::printf("%s: trained %zu speaker models -> %s\n", std::string(to_string(f)).c_str(), models.size(),
                    o.out.c_str());
    }
    return kOk;
}

int cmd_evaluate(const Options& o, CliConfig c) {
    require(o.corpus, "--corpus");
    const auto corpus = load_corpus(o.corpus);
    c.experiment.noise_sources = resolve_noise(c);
    std::map<ModelFamily, SpeakerModels> trained;
    if (!o.models_dir.empty())
        for (ModelFamily f : c.experiment.model_families) trained.emplace(f, load_models(o.models_dir, f, corpus));
    else
        for (ModelFamily f : c.experiment.model_families) trained.emplace(f, train_speaker_models(corpus, f, c.experiment));
    if (!o.save_models.empty())
        for (const auto& [f, models] : trained) save_models(o.save_models, f, models);

    const auto table = run_experiment(corpus, c.experiment, trained);
    std::fputs(render_table(table, c.experiment).c_str(), stdout);
    if (!o.out.empty()) write_text_file(o.out, report_json(table, c.experiment));
    if (!o.csv.empty()) write_text_file(o.csv, report_csv(table));
    return kOk;
}

int cmd_inspect(const Options& o) {
    require(o.model, "model path");
    const Model m = load_model(o.model);
    if (const auto* g = std::get_if<DiagonalGmm>(&m)) {
        check_gmm(*g);
        std::printf("kind: gmm\nnum_variables: %zu\ncomponents: %zu\nparameter_count: %zu\n", g->num_variables(),
                    g->num_components(), gmm_parameter_count(*g));
        return kOk;
    }
    const auto& g = std::get<SpnGraph>(m);
    const auto s = summarize(g);
    const auto r = validate(g);
    std::printf("kind: spn\nnum_variables: %zu\nnodes: %zu\nsums: %zu\nproducts: %zu\nleaves: %zu\ndepth: %zu\n"
                "parameter_count: %zu\n",
                g.num_variables, g.nodes.size(), s.sums, s.products, s.leaves, s.depth, parameter_count(g));
    auto flag = [](const char* name, bool v) { std::printf("  %-26s %s\n", name, v ? "yes" : "no"); };
    std::printf("validity: %s\n", r.is_valid() ? "valid" : "INVALID");
    flag("references_valid", r.references_valid);
    flag("acyclic", r.is_acyclic);
    flag("all_reachable", r.all_reachable);
    flag("nodes_well_formed", r.nodes_well_formed);
    flag("complete", r.is_complete);
    flag("decomposable", r.is_decomposable);
    flag("weights_nonneg", r.weights_nonneg);
    flag("weights_normalized", r.weights_normalized);
    flag("root_covers_all_variables", r.root_covers_all_variables);
    for (const auto& [id, why] : r.offending_nodes) std::printf("  node %zu: %s\n", id, why.c_str());
    return r.is_valid() ? kOk : kModel;
}

int cmd_synth(const Options& o, const CliConfig& c) {
    require(o.out, "--out");
    const auto corpus =
        generate_synthetic_corpus(c.experiment.seed, o.speakers, o.utterances, o.seconds, o.test_utterances);
    save_corpus(corpus, o.out);
    std::printf("%zu speakers -> %s\n", corpus.speakers.size(), o.out.c_str());
    if (!o.noise_out.empty()) {
        fs::create_directories(o.noise_out);
        for (const auto& n : synthetic_noise_sources(derive_seed(c.experiment.seed, "noise")))
            write_wav((fs::path(o.noise_out) / (n.name + ".wav")).string(), {n.samples, 16000});
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Speaker identification with sum-product networks under noise"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_file, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", o.assignments, "Override a parameter: section.key=value");
        sub->add_option("--seed", o.seed, "Global seed");
        sub->add_flag("--show-config", o.show_config, "Print the resolved configuration and exit");
    };

    auto* features = app.add_subcommand("features", "Extract log-spectral subband energies from a WAV file");
    features->add_option("--in", o.in, "Input WAV");
    features->add_option("--out", o.out, "Output feature matrix");
    features->add_option("--csv", o.csv, "Also write the features as CSV");
    common(features);

    auto* mix = app.add_subcommand("mix", "Mix clean speech with noise at a target SNR");
    mix->add_option("--clean", o.clean, "Clean speech WAV");
    mix->add_option("--noise", o.noise_wav, "Noise WAV");
    mix->add_option("--snr", o.snr, "Target SNR in dB")->required();
    mix->add_option("--noise-offset", o.noise_offset, "Start sample in the noise (random when omitted)");
    mix->add_option("--out", o.out, "Output noisy WAV");
    mix->add_option("--mask", o.mask, "Also write the oracle reliability mask");
    common(mix);

    auto* train = app.add_subcommand("train", "Train one model per speaker");
    train->add_option("--corpus", o.corpus, "Corpus root: <root>/<speaker>/{train,test}/*.wav");
    train->add_option("--families", o.families, "Model families, comma separated (spn,gmm)");
    train->add_option("--out", o.out, "Output directory for model files");
    common(train);

    auto* evaluate = app.add_subcommand("evaluate", "Run the noise x SNR x mode identification experiment");
    evaluate->add_option("--corpus", o.corpus, "Corpus root");
    evaluate->add_option("--noise", o.noise, "Noise WAV files or synthetic:<name>, comma separated")->delimiter(',');
    evaluate->add_option("--snr", o.snrs, "SNR levels in dB, comma separated");
    evaluate->add_option("--modes", o.modes, "Evidence modes, comma separated (none,marginal,bounded)");
    evaluate->add_option("--families", o.families, "Model families, comma separated (spn,gmm)");
    evaluate->add_option("--models-dir", o.models_dir, "Load trained models instead of training");
    evaluate->add_option("--save-models", o.save_models, "Write the trained models here");
    evaluate->add_option("--out", o.out, "JSON report path");
    evaluate->add_option("--csv", o.csv, "CSV of accuracy cells");
    common(evaluate);

    auto* inspect = app.add_subcommand("inspect", "Summarize a model file");
    inspect->add_option("model", o.model, "Model file");
    common(inspect);

    auto* synth = app.add_subcommand("synth-corpus", "Write a synthetic corpus of WAV files");
    synth->add_option("--out", o.out, "Corpus root to create");
    synth->add_option("--speakers", o.speakers, "Number of speakers");
    synth->add_option("--utterances", o.utterances, "Utterances per speaker");
    synth->add_option("--test-utterances", o.test_utterances, "Held-out utterances per speaker (0: a third)");
    synth->add_option("--seconds", o.seconds, "Utterance length in seconds");
    synth->add_option("--noise-out", o.noise_out, "Also write synthetic noise WAVs here");
    common(synth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        const CliConfig c = resolve(o);
        if (o.show_config) {
            std::fputs(show_config(c).c_str(), stdout);
            return kOk;
        }
        if (*features) return cmd_features(o, c);
        if (*mix) return cmd_mix(o, c);
        if (*train) return cmd_train(o, c);
        if (*evaluate) return cmd_evaluate(o, c);
        if (*inspect) return cmd_inspect(o);
        if (*synth) return cmd_synth(o, c);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    }
    return kUsage;
}
