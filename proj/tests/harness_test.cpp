// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "spnasi/harness.hpp"

using namespace spnasi;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.em.num_components = 4;
    cfg.snr_levels_db = {-5.0, 10.0};
    cfg.noise_sources = synthetic_noise_sources(3, 4.0);
    cfg.seed = 11;
    return cfg;
}

const Corpus& small_corpus() {
    static const Corpus c = generate_synthetic_corpus(5, 3, 4, 1.0);
    return c;
}

std::vector<Evidence> observed_frames(const Matrix& f) { return build_evidence(f, all_reliable(f.rows(), f.cols()), MarginalMode::none); }

}  // namespace

TEST(SyntheticCorpus, ShapeAndDeterminism) {
    const auto c = generate_synthetic_corpus(1, 10, 5, 2.0);
    ASSERT_EQ(c.speakers.size(), 10u);
    std::size_t n = 0;
    for (const auto& s : c.speakers) {
        EXPECT_EQ(s.train.size() + s.test.size(), 5u);
        EXPECT_GE(s.test.size(), 1u);
        for (const auto* split : {&s.train, &s.test})
            for (const auto& u : *split) {
                ++n;
                EXPECT_EQ(u.sample_rate, 16000u);
                EXPECT_EQ(u.samples.size(), 32000u);
                for (double v : u.samples) EXPECT_LT(std::abs(v), 1.0);
            }
    }
    EXPECT_EQ(n, 50u);
    const auto again = generate_synthetic_corpus(1, 10, 5, 2.0);
    EXPECT_EQ(again.speakers[3].train[1].samples, c.speakers[3].train[1].samples);
    EXPECT_THROW(generate_synthetic_corpus(1, 1, 5, 2.0), Error);
}

TEST(SyntheticCorpus, SpeakersDifferInSubbandMeans) {
    const auto c = generate_synthetic_corpus(2, 4, 2, 2.0);
    const FeatureExtractor fx;
    std::vector<std::vector<double>> means;
    for (const auto& s : c.speakers) {
        const auto f = fx(s.train[0].samples);
        std::vector<double> m(f.cols(), 0.0);
        for (std::size_t r = 0; r < f.rows(); ++r)
            for (std::size_t b = 0; b < f.cols(); ++b) m[b] += f(r, b) / double(f.rows());
        means.push_back(m);
    }
    for (std::size_t a = 0; a < means.size(); ++a)
        for (std::size_t b = a + 1; b < means.size(); ++b) {
            int differing = 0;
            for (std::size_t k = 0; k < 26; ++k) differing += std::abs(means[a][k] - means[b][k]) > 1.0;
            EXPECT_GE(differing, 3) << a << " vs " << b;
        }
}

TEST(TrainSpeakerModels, SpnModelsAreValidAndNormalized) {
    Corpus c = small_corpus();
    c.speakers.resize(2);
    const auto models = train_speaker_models(c, ModelFamily::spn, small_config());
    ASSERT_EQ(models.size(), 2u);
    for (const auto& [id, m] : models) {
        const auto g = deserialize_spn(m.serialize());
        const auto r = validate(g);
        EXPECT_TRUE(r.is_valid());
        EXPECT_TRUE(r.weights_normalized);
    }
}

TEST(TrainSpeakerModels, GmmWithTooFewFramesNamesSpeaker) {
    Corpus c = generate_synthetic_corpus(5, 2, 2, 0.3);
    ExperimentConfig cfg;
    try {
        train_speaker_models(c, ModelFamily::gmm, cfg);
        FAIL() << "expected a training error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::training);
        EXPECT_NE(std::string(e.what()).find("spk0"), std::string::npos);
    }
}

TEST(TrainSpeakerModels, Deterministic) {
    const auto cfg = small_config();
    for (auto fam : {ModelFamily::spn, ModelFamily::gmm}) {
        const auto a = train_speaker_models(small_corpus(), fam, cfg);
        const auto b = train_speaker_models(small_corpus(), fam, cfg);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].second.serialize(), b[i].second.serialize());
    }
}

TEST(ScoreUtterance, Rules) {
    const SpeakerModel m(DiagonalGmm{{1.0}, Matrix(1, 2, 0.0), Matrix(1, 2, 1.0)});
    EXPECT_EQ(score_utterance(m, {}), 0.0);
    EXPECT_EQ(score_utterance(m, {all_missing(2)}), 0.0);
    const Evidence e{VariableState::observed(0.3), VariableState::upper_bounded(1.0)};
    EXPECT_EQ(score_utterance(m, {e, e}), 2.0 * score_utterance(m, {e}));
    EXPECT_THROW(score_utterance(m, {all_missing(3)}), Error);
}

TEST(Identify, SingleSpeakerAndTies) {
    const DiagonalGmm g{{1.0}, Matrix(1, 1, 0.0), Matrix(1, 1, 1.0)};
    const std::vector<Evidence> frames{{VariableState::observed(0.5)}};
    SpeakerModels one;
    one.emplace_back("solo", SpeakerModel(g));
    EXPECT_EQ(identify(one, frames), "solo");
    SpeakerModels tied;
    tied.emplace_back("alice", SpeakerModel(g));
    tied.emplace_back("bob", SpeakerModel(g));
    EXPECT_EQ(identify(tied, frames), "alice");
}

TEST(Identify, SeparatedSpeakersClean) {
    Corpus c = generate_synthetic_corpus(8, 2, 9, 1.0, 4);
    const auto cfg = small_config();
    const auto models = train_speaker_models(c, ModelFamily::gmm, cfg);
    const FeatureExtractor fx;
    std::size_t correct = 0, total = 0;
    for (const auto& s : c.speakers)
        for (const auto& u : s.test) {
            correct += identify(models, observed_frames(fx(u.samples))) == s.id;
            ++total;
        }
    EXPECT_GE(double(correct) / double(total), 0.95);
}

TEST(RunExperiment, ShapeRangeAndClean) {
    auto cfg = small_config();
    cfg.model_families = {ModelFamily::gmm};
    const auto t = run_experiment(small_corpus(), cfg);
    ASSERT_EQ(t.rows.size(), 3u);
    for (const auto& r : t.rows) {
        EXPECT_EQ(r.cells.size(), cfg.noise_sources.size() * cfg.snr_levels_db.size());
        for (const auto& c : r.cells) {
            EXPECT_FALSE(c.failure);
            EXPECT_GE(c.accuracy(), 0.0);
            EXPECT_LE(c.accuracy(), 100.0);
        }
        ASSERT_TRUE(r.clean);
    }
    // Every mode sees an all-reliable mask on clean input.
    EXPECT_EQ(t.rows[0].clean->correct, t.rows[1].clean->correct);
    EXPECT_EQ(t.rows[0].clean->correct, t.rows[2].clean->correct);
    EXPECT_EQ(t.parameters.at(0).average(), 4.0 + 2.0 * 4.0 * 26.0);
}

TEST(RunExperiment, CleanEqualsIdentityMaskPipeline) {
    auto cfg = small_config();
    cfg.model_families = {ModelFamily::gmm};
    cfg.modes = {MarginalMode::none};
    cfg.noise_sources.clear();
    const auto models = train_speaker_models(small_corpus(), ModelFamily::gmm, cfg);
    const auto t = run_experiment(small_corpus(), cfg, {{ModelFamily::gmm, models}});
    const FeatureExtractor fx;
    std::size_t correct = 0;
    for (const auto& s : small_corpus().speakers)
        for (const auto& u : s.test) correct += identify(models, observed_frames(fx(u.samples))) == s.id;
    EXPECT_EQ(t.rows[0].clean->correct, correct);
}

TEST(RunExperiment, FailingCellRecordsReason) {
    auto cfg = small_config();
    cfg.model_families = {ModelFamily::gmm};
    cfg.snr_levels_db = {0.0};
    cfg.noise_sources = {{"short", std::vector<double>(100, 0.1)}};
    const auto t = run_experiment(small_corpus(), cfg);
    for (const auto& r : t.rows) {
        ASSERT_EQ(r.cells.size(), 1u);
        ASSERT_TRUE(r.cells[0].failure);
        EXPECT_NE(r.cells[0].failure->find("shorter"), std::string::npos);
    }
    EXPECT_NE(report_json(t, cfg).find("\"failure\""), std::string::npos);
    EXPECT_NE(render_table(t, cfg).find("FAIL"), std::string::npos);
}

TEST(RunExperiment, ReportsAreReproducible) {
    auto cfg = small_config();
    cfg.model_families = {ModelFamily::gmm};
    const auto a = run_experiment(small_corpus(), cfg);
    const auto b = run_experiment(small_corpus(), cfg);
    EXPECT_EQ(report_json(a, cfg), report_json(b, cfg));
    EXPECT_EQ(report_csv(a), report_csv(b));
}

TEST(Corpus, SaveAndLoad) {
    const auto dir = std::filesystem::temp_directory_path() / "spnasi_corpus_test";
    std::filesystem::remove_all(dir);
    save_corpus(small_corpus(), dir.string());
    const auto c = load_corpus(dir.string());
    ASSERT_EQ(c.speakers.size(), small_corpus().speakers.size());
    for (std::size_t i = 0; i < c.speakers.size(); ++i) {
        EXPECT_EQ(c.speakers[i].id, small_corpus().speakers[i].id);
        EXPECT_EQ(c.speakers[i].train.size(), small_corpus().speakers[i].train.size());
        EXPECT_EQ(c.speakers[i].test[0].samples, quantize_pcm16(small_corpus().speakers[i].test[0].samples));
    }
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_corpus(dir.string()), Error);
}
